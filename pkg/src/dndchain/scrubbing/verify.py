import logging
from dataclasses import dataclass
from typing import Optional, Tuple

from dndchain.core.config import ChainConfig
from dndchain.core.errors import BadSignature, DigestMismatch, TokenNotOnChain
from dndchain.ledger.state import WorldState
from dndchain.membership.contracts import member_key
from dndchain.membership.crypto import KeyPair, digest, verify
from dndchain.registries.subscribers import subscriber_key
from dndchain.registries.templates import TemplateKind, template_key
from dndchain.scrubbing.files import FileStore, parse_number_file
from dndchain.scrubbing.mirror import is_deliverable
from dndchain.scrubbing.service import OperatorLeg, ScrubToken, scrub_key

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VerifiedFile:
    operator: str
    numbers: Tuple[str, ...]
    discrepancies: Tuple[str, ...] = ()  # hashed keys that re-scrub says are not deliverable


def verify_scrub_token(
    operator_id: str,
    token: ScrubToken,
    state: WorldState,
    keypair: KeyPair,
    store: FileStore,
    *,
    rescrub_index=None,
    config: Optional[ChainConfig] = None,
) -> VerifiedFile:
    """Check the token against its committed ScrubResult and open this operator's file."""
    committed = state.record(scrub_key(token.token_id))
    if committed is None or committed != token.to_args():
        raise TokenNotOnChain(f"no committed ScrubResult for token {token.token_id[:8]}")
    scrubber = state.record(member_key(token.scrubber_id))
    if scrubber is None:
        raise BadSignature(f"unknown scrubber {token.scrubber_id}")
    if not verify(scrubber["public_key"], token.signing_bytes(), token.signature):
        raise BadSignature("token signature does not verify")
    leg = token.leg(operator_id)
    if leg is None:
        return VerifiedFile(operator_id, ())
    message = OperatorLeg.signing_bytes(token.token_id, leg.operator, leg.digest, leg.lines)
    if not verify(scrubber["public_key"], message, leg.signature):
        raise BadSignature(f"file signature for {operator_id} does not verify")

    plaintext = keypair.decrypt(store.get(leg.locator))
    if digest(plaintext) != leg.digest:
        raise DigestMismatch(f"file for {operator_id} does not match its digest")
    numbers = tuple(parse_number_file(plaintext))

    discrepancies: Tuple[str, ...] = ()
    if rescrub_index is not None:
        if config is None:
            raise ValueError("re-scrubbing needs the chain configuration")
        template = state.record(template_key(token.template_id))
        if template is None or template["kind"] != TemplateKind.TRANSACTIONAL.value:
            secret = config.crypto.key_bytes
            overrides = config.registry.consent_overrides_full_block
            discrepancies = tuple(
                key
                for key in (subscriber_key(n, secret) for n in numbers)
                if not is_deliverable(key, token.header, token.category, rescrub_index, overrides)
            )
        if discrepancies:
            logger.warning(f"{operator_id}: re-scrub disagrees on {len(discrepancies)} numbers")
    return VerifiedFile(operator_id, numbers, discrepancies)
