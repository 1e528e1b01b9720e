"""Endorsement policies: a small rule language over roles and identities.

Grammar (prefix form, case-insensitive names)::

    rule := MAJORITY | ALL(role) | ANY(role) | AT_LEAST(n, role) | ID(id)
          | AND(rule, rule, ...) | OR(rule, rule, ...)

A role argument may also be written ``role=operator``.
"""

import re
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Sequence, Set, Tuple

from dndchain.core.errors import ConfigInvalid, MismatchedReadWriteSets
from dndchain.ledger.types import Endorsement, TxType

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_\-=]*)|(?P<punct>[(),]))")


class Rule(ABC):
    @abstractmethod
    def evaluate(self, endorsers: Set[str], members: Mapping[str, str]) -> bool:
        """``endorsers`` are ids; ``members`` maps every live participant id to its role."""

    @abstractmethod
    def candidates(self, members: Mapping[str, str]) -> Set[str]:
        """Participants whose endorsement can count towards this rule."""


@dataclass(frozen=True)
class Majority(Rule):
    def evaluate(self, endorsers, members):
        return 2 * len(endorsers & set(members)) > len(members)

    def candidates(self, members):
        return set(members)


@dataclass(frozen=True)
class AtLeast(Rule):
    count: int
    role: str

    def evaluate(self, endorsers, members):
        return sum(1 for e in endorsers if members.get(e) == self.role) >= self.count

    def candidates(self, members):
        return {m for m, role in members.items() if role == self.role}


@dataclass(frozen=True)
class AllOf(Rule):
    role: str

    def evaluate(self, endorsers, members):
        return all(m in endorsers for m, role in members.items() if role == self.role)

    def candidates(self, members):
        return {m for m, role in members.items() if role == self.role}


@dataclass(frozen=True)
class Identity(Rule):
    participant: str

    def evaluate(self, endorsers, members):
        return self.participant in endorsers and self.participant in members

    def candidates(self, members):
        return {self.participant} & set(members)


@dataclass(frozen=True)
class And(Rule):
    rules: Tuple[Rule, ...]

    def evaluate(self, endorsers, members):
        return all(rule.evaluate(endorsers, members) for rule in self.rules)

    def candidates(self, members):
        return set().union(*(rule.candidates(members) for rule in self.rules))


@dataclass(frozen=True)
class Or(Rule):
    rules: Tuple[Rule, ...]

    def evaluate(self, endorsers, members):
        return any(rule.evaluate(endorsers, members) for rule in self.rules)

    def candidates(self, members):
        return set().union(*(rule.candidates(members) for rule in self.rules))


@dataclass(frozen=True)
class EndorsementPolicy:
    tx_type: TxType
    rule: Rule
    expression: str


def _tokenize(expression: str) -> List[str]:
    tokens, pos = [], 0
    expression = expression.rstrip()
    while pos < len(expression):
        match = _TOKEN.match(expression, pos)
        if not match or match.end() == pos:
            raise ConfigInvalid(f"cannot parse policy near {expression[pos:]!r}")
        tokens.append(match.group(match.lastgroup))
        pos = match.end()
    return tokens


class _Parser:
    def __init__(self, expression: str):
        self.expression = expression
        self.tokens = _tokenize(expression)
        self.pos = 0

    def fail(self, message: str):
        raise ConfigInvalid(f"policy {self.expression!r}: {message}")

    def take(self) -> str:
        if self.pos >= len(self.tokens):
            self.fail("unexpected end")
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def expect(self, token: str) -> None:
        if self.take() != token:
            self.fail(f"expected {token!r}")

    def arguments(self) -> List[str]:
        self.expect("(")
        args = [self.take()]
        while self.tokens[self.pos : self.pos + 1] == [","]:
            self.pos += 1
            args.append(self.take())
        self.expect(")")
        return args

    @staticmethod
    def role(arg: str) -> str:
        return arg.split("=", 1)[1] if arg.lower().startswith("role=") else arg

    def rule(self) -> Rule:
        name = self.take().upper()
        if name == "MAJORITY":
            if self.tokens[self.pos : self.pos + 1] == ["("]:
                self.expect("(")
                self.expect(")")
            return Majority()
        if name in ("AND", "OR"):
            self.expect("(")
            rules = [self.rule()]
            while self.tokens[self.pos : self.pos + 1] == [","]:
                self.pos += 1
                rules.append(self.rule())
            self.expect(")")
            return And(tuple(rules)) if name == "AND" else Or(tuple(rules))
        args = self.arguments()
        if name == "ALL" and len(args) == 1:
            return AllOf(self.role(args[0]))
        if name == "ANY" and len(args) == 1:
            return AtLeast(1, self.role(args[0]))
        if name == "AT_LEAST" and len(args) == 2 and args[0].isdigit():
            return AtLeast(int(args[0]), self.role(args[1]))
        if name == "ID" and len(args) == 1:
            return Identity(args[0])
        self.fail(f"unknown rule {name}({', '.join(args)})")

    def parse(self) -> Rule:
        rule = self.rule()
        if self.pos != len(self.tokens):
            self.fail("trailing tokens")
        return rule


def parse_policy(expression: str) -> Rule:
    return _Parser(expression).parse()


def build_policies(expressions: Mapping[str, str], default: str) -> Dict[TxType, EndorsementPolicy]:
    policies = {}
    for tx_type in TxType:
        expression = expressions.get(tx_type.value, default)
        policies[tx_type] = EndorsementPolicy(tx_type, parse_policy(expression), expression)
    return policies


def evaluate_policy(
    policy: EndorsementPolicy,
    endorsements: Iterable[Endorsement],
    members: Mapping[str, str],
) -> bool:
    """Pure check of an already signature-verified endorsement set."""
    endorsements = list(endorsements)
    if len({e.rwset_digest for e in endorsements}) > 1:
        raise MismatchedReadWriteSets(f"{policy.tx_type.value}: endorsers disagree on the rwset")
    endorsers = {e.endorser for e in endorsements if e.endorser in members}
    return policy.rule.evaluate(endorsers, members)


def endorsement_order(policy: EndorsementPolicy, members: Mapping[str, str]) -> Sequence[str]:
    """Deterministic order in which a gateway asks for endorsements."""
    return sorted(policy.rule.candidates(members))
