"""FastAPI app exposing the subscriber operations an operator would offer.

Numbers arrive in request bodies, are hashed on entry, and only the hashed key
is proposed to the ledger. Writes return the transaction id; they commit once
the consortium advances.
"""

import logging
from typing import Dict, List, Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from dndchain.campaign.audit import Auditor
from dndchain.campaign.complaints import committed_complaints, file_complaint, lookup_complaint
from dndchain.core.errors import (
    DndChainError,
    MalformedNumber,
    MalformedSender,
    NodeUnavailable,
    UnresolvedOperator,
    ValidatorRejected,
)
from dndchain.harness.consortium import Consortium
from dndchain.harness.node import Node
from dndchain.harness.reports import verdict_frame
from dndchain.registries.categories import PreferenceMode
from dndchain.registries.consent import ConsentRecord, consent_key, lookup_consent, revoke_consent
from dndchain.registries.preferences import lookup_preference, update_preference
from dndchain.registries.subscribers import normalize_number, subscriber_key
from dndchain.scrubbing.mirror import MirrorIndex
from dndchain.scrubbing.service import resolve_operator

logger = logging.getLogger("dndchain.api")

_STATUS_FOR = {
    MalformedNumber: 422,
    MalformedSender: 422,
    UnresolvedOperator: 404,
    ValidatorRejected: 409,
    NodeUnavailable: 503,
}


class NumberRequest(BaseModel):
    number: str = Field(..., description="Subscriber number, any common format")


class PreferenceRequest(NumberRequest):
    mode: PreferenceMode
    categories: List[int] = Field(default_factory=list)


class RevokeConsentRequest(NumberRequest):
    header: str


class ComplaintRequest(NumberRequest):
    sender: str = Field(..., description="Header such as VM-STABAN or a sending number")
    message: str


class AdvanceRequest(BaseModel):
    ticks: int = Field(1, ge=1, le=1000)


def _consent_view(record: ConsentRecord) -> Dict:
    return {
        "header": record.header,
        "status": record.status.value,
        "consent_template_id": record.consent_template_id,
        "channel": record.channel.value,
        "history": [list(entry) for entry in record.history],
    }


def create_app(consortium: Consortium) -> FastAPI:
    app = FastAPI(title="dndchain", description="Do-not-disturb preferences, consent and complaints")
    app.state.consortium = consortium
    secret = consortium.config.crypto.key_bytes

    def operator_for(number: str) -> tuple[Node, str]:
        normalized = normalize_number(number)
        key = subscriber_key(normalized, secret)
        observer = reader()
        operator = resolve_operator(normalized, MirrorIndex.from_state(observer.peer.state), consortium.config, key)
        if operator not in consortium.nodes:
            raise UnresolvedOperator(f"operator {operator} is not part of this consortium")
        if not consortium.is_up(operator):
            raise NodeUnavailable(f"{operator} is down")
        return consortium.node(operator), key

    def reader() -> Node:
        best = max(sorted(consortium.nodes), key=lambda i: consortium.nodes[i].peer.height)
        return consortium.node(best)

    @app.exception_handler(DndChainError)
    async def chain_error(request: Request, exc: DndChainError):
        status = next((code for kind, code in _STATUS_FOR.items() if isinstance(exc, kind)), 400)
        logger.info(f"{request.url.path}: {type(exc).__name__}: {exc}")
        return JSONResponse(status_code=status, content={"error": type(exc).__name__, "detail": str(exc)})

    @app.get("/health")
    async def health():
        """Health check endpoint."""
        return {"status": "healthy"}

    @app.get("/chain")
    async def chain_head():
        node = reader()
        return {
            "height": node.peer.height,
            "tip": node.peer.tip_hash.hex(),
            "tick": consortium.now,
            "members": node.peer.members(),
        }

    @app.post("/ticks")
    async def advance(body: AdvanceRequest):
        consortium.advance(body.ticks)
        consortium.settle()
        return {"tick": consortium.now, "height": consortium.chain_height}

    @app.post("/preferences", status_code=202)
    async def set_preference(body: PreferenceRequest):
        node, key = operator_for(body.number)
        tx_id = update_preference(node.gateway, key, node.node_id, body.mode, body.categories)
        return {"tx_id": tx_id, "operator": node.node_id}

    @app.post("/preferences/lookup")
    async def get_preference(body: NumberRequest):
        key = subscriber_key(body.number, secret)
        record = lookup_preference(reader().peer.state, key)
        if record is None:
            raise HTTPException(status_code=404, detail="no preference registered")
        return {"operator": record.operator, "mode": record.mode.value, "blocked": list(record.blocked)}

    @app.post("/consents/lookup")
    async def list_consents(body: NumberRequest):
        key = subscriber_key(body.number, secret)
        state = reader().peer.state
        return [_consent_view(ConsentRecord.from_record(record)) for _, record in state.records(consent_key(key, ""))]

    @app.post("/consents/revoke", status_code=202)
    async def revoke(body: RevokeConsentRequest):
        node, key = operator_for(body.number)
        if lookup_consent(reader().peer.state, key, body.header) is None:
            raise HTTPException(status_code=404, detail=f"no consent for {body.header}")
        return {"tx_id": revoke_consent(node.gateway, key, body.header)}

    @app.post("/complaints", status_code=202)
    async def complain(body: ComplaintRequest):
        node, key = operator_for(body.number)
        complaint_id, tx_id = file_complaint(node.gateway, key, body.sender, body.message, consortium.now)
        return {"complaint_id": complaint_id, "tx_id": tx_id}

    @app.get("/complaints/{complaint_id}")
    async def get_complaint(complaint_id: str):
        complaint = lookup_complaint(reader().peer.state, complaint_id)
        if complaint is None:
            raise HTTPException(status_code=404, detail=f"unknown complaint {complaint_id}")
        return {
            "complaint_id": complaint.complaint_id,
            "class": complaint.complaint_class.value,
            "sender_kind": complaint.sender_kind.value,
            "received_tick": complaint.received_tick,
        }

    @app.get("/verdicts")
    async def verdicts(only_violations: Optional[bool] = False):
        auditor = Auditor(consortium.blocks, consortium.trace, consortium.config)
        found = auditor.audit_all(committed_complaints(auditor.state))
        if only_violations:
            found = [v for v in found if v.is_violation]
        return verdict_frame(found).to_dict(orient="records")

    return app
