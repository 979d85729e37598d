"""Loan-level CSV ingestion: band assignment, filtering, outcome detection.

The normalized input is two CSV files.  The static file carries one row per
loan (origination fields plus the total recovered amount); the long file
carries one row per loan-month with balance, payment, and principal.  The
pipeline classifies each loan into an APR risk band, applies the eligibility
filter, determines the outcome from the payment vectors, and emits one
observation per retained loan in loan-age coordinates.

Monetary fields are parsed as exact decimals so that outcome classification
(zero-payment runs, principal-vs-balance comparisons) never depends on binary
float representation.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from enum import Enum
from pathlib import Path

from .errors import SchemaError
from .riskmodel import Cause

__all__ = [
    "RiskBand",
    "LoanRecord",
    "PaymentHistory",
    "OutcomeKind",
    "LoanOutcome",
    "ObservedLoan",
    "FilterPolicy",
    "classify_risk_band",
    "filter_loans",
    "determine_outcome",
    "to_observation",
    "build_observations",
    "load_loan_data",
    "read_observations_csv",
    "write_observations_csv",
    "write_loans_csv",
    "write_payments_csv",
]

DEFAULT_PAD = Decimal("10")


class RiskBand(Enum):
    """APR-defined borrower tier, ordered from least to most risky."""

    SUPER_PRIME = 0
    PRIME = 1
    NEAR_PRIME = 2
    SUBPRIME = 3
    DEEP_SUBPRIME = 4

    @property
    def label(self) -> str:
        return _BAND_LABELS[self]

    @classmethod
    def from_label(cls, label: str) -> "RiskBand":
        key = label.strip().lower().replace("-", "_").replace(" ", "_")
        for band, name in _BAND_LABELS.items():
            if key == name:
                return band
        raise ValueError(f"unknown risk band: {label!r}")


_BAND_LABELS = {
    RiskBand.SUPER_PRIME: "super_prime",
    RiskBand.PRIME: "prime",
    RiskBand.NEAR_PRIME: "near_prime",
    RiskBand.SUBPRIME: "subprime",
    RiskBand.DEEP_SUBPRIME: "deep_subprime",
}

# Left-closed APR boundaries: [0,5) super-prime, [5,10) prime, [10,15)
# near-prime, [15,20) subprime, [20,inf) deep subprime.
_BAND_EDGES = (
    (5.0, RiskBand.SUPER_PRIME),
    (10.0, RiskBand.PRIME),
    (15.0, RiskBand.NEAR_PRIME),
    (20.0, RiskBand.SUBPRIME),
)


def classify_risk_band(apr_pct: float) -> RiskBand:
    """Map an APR percentage to its risk band (boundaries belong upward)."""
    if apr_pct < 0:
        raise ValueError(f"negative APR: {apr_pct}")
    for edge, band in _BAND_EDGES:
        if apr_pct < edge:
            return band
    return RiskBand.DEEP_SUBPRIME


@dataclass(frozen=True)
class PaymentHistory:
    """Per-month balance/payment/principal vectors for one loan.

    Balances may be missing for individual months (None); payments and
    principal are always present.  All three vectors share one length.
    """

    balance: tuple
    payment: tuple
    principal: tuple

    def __post_init__(self) -> None:
        if len(self.balance) == 0:
            raise ValueError("empty payment history")
        if not len(self.balance) == len(self.payment) == len(self.principal):
            raise ValueError("balance/payment/principal lengths differ")

    @property
    def months(self) -> int:
        return len(self.balance)


@dataclass
class LoanRecord:
    loan_id: str
    apr_pct: float
    original_amount: Decimal
    original_term: int
    loan_age_at_entry: int
    has_coborrower: bool
    income_verification: str
    subvention: bool
    vehicle_condition: str
    initial_status: str
    recovered_amount: Decimal
    history: PaymentHistory | None = None

    def __post_init__(self) -> None:
        if self.apr_pct < 0:
            raise ValueError("apr_pct must be >= 0")
        if self.original_amount <= 0:
            raise ValueError("original_amount must be positive")

    @property
    def band(self) -> RiskBand:
        return classify_risk_band(self.apr_pct)


class OutcomeKind(Enum):
    DEFAULTED = "defaulted"
    REPAID = "repaid"
    CENSORED = "censored"


@dataclass(frozen=True)
class LoanOutcome:
    kind: OutcomeKind
    event_month: int  # 1-based trust-month index

    def __post_init__(self) -> None:
        if self.event_month < 1:
            raise ValueError("event_month must be >= 1")


@dataclass(frozen=True)
class ObservedLoan:
    """One truncated/censored observation in loan-age coordinates."""

    entry_age: int
    exit_age: int
    observed_event: bool
    cause: Cause | None = None
    loan_id: str = ""
    band: RiskBand | None = None

    def __post_init__(self) -> None:
        if self.entry_age > self.exit_age:
            raise ValueError("entry_age must be <= exit_age")
        if self.observed_event and self.cause is None:
            raise ValueError("observed events must carry a cause")
        if not self.observed_event and self.cause is not None:
            raise ValueError("censored observations must not carry a cause")


@dataclass(frozen=True)
class FilterPolicy:
    """Eligibility criteria applied by filter_loans.

    Defaults follow the pool-comparability rules: single borrower, income
    stated but not verified, no subvention, used vehicle, not already
    repossessed at entry, younger than 18 months at entry, 72/73-month term.
    """

    income_verification: str = "stated_not_verified"
    vehicle_condition: str = "used"
    excluded_initial_status: tuple = ("repossessed",)
    max_entry_age: int = 18  # exclusive
    allowed_terms: tuple = (72, 73)


def filter_loans(records, policy: FilterPolicy = FilterPolicy()) -> list:
    """Retain records passing every eligibility and integrity criterion.

    The integrity check drops loans whose outcome cannot be determined: total
    principal paid falls short of the first-month balance while the final
    month's balance is missing (and loans whose first balance is itself
    missing).  An empty result is allowed.
    """
    kept = []
    for rec in records:
        if rec.has_coborrower:
            continue
        if rec.income_verification != policy.income_verification:
            continue
        if rec.subvention:
            continue
        if rec.vehicle_condition != policy.vehicle_condition:
            continue
        if rec.initial_status in policy.excluded_initial_status:
            continue
        if rec.loan_age_at_entry >= policy.max_entry_age:
            continue
        if rec.original_term not in policy.allowed_terms:
            continue
        if rec.history is not None and not _history_integrity_ok(rec.history):
            continue
        kept.append(rec)
    return kept


def _history_integrity_ok(history: PaymentHistory) -> bool:
    first_bal = history.balance[0]
    if first_bal is None:
        return False
    paid = sum(history.principal)
    if paid < first_bal and history.balance[-1] is None:
        return False
    return True


def determine_outcome(history: PaymentHistory, pad: Decimal = DEFAULT_PAD) -> LoanOutcome:
    """Classify one loan's payment vectors as repaid, defaulted, or censored.

    The principal test runs first: if total principal plus the pad covers the
    first-month balance, the loan is repaid at the first zero-balance month
    (falling back to the last month when no balance ever reads zero).
    Otherwise three consecutive zero payments mark a default at the first of
    the three.  Anything else is censored at the last trust month.
    """
    first_bal = history.balance[0]
    if first_bal is None:
        raise ValueError("first-month balance missing; outcome undeterminable")
    paid = sum(history.principal)
    if paid + pad >= first_bal:
        for month, bal in enumerate(history.balance, start=1):
            if bal is not None and bal == 0:
                return LoanOutcome(OutcomeKind.REPAID, month)
        return LoanOutcome(OutcomeKind.REPAID, history.months)
    zeros = 0
    for month, pmt in enumerate(history.payment, start=1):
        if pmt == 0:
            zeros += 1
            if zeros == 3:
                return LoanOutcome(OutcomeKind.DEFAULTED, month - 2)
        else:
            zeros = 0
    return LoanOutcome(OutcomeKind.CENSORED, history.months)


def to_observation(record: LoanRecord, outcome: LoanOutcome) -> ObservedLoan:
    """Translate a trust-month outcome into loan-age coordinates.

    Entry age is one-based: a loan entering the pool at loan age a is first
    observable at age a + 1, and an event in trust month m happens at loan
    age a + m.
    """
    if record.history is not None and outcome.event_month > record.history.months:
        raise ValueError("event_month exceeds payment-history length")
    observed = outcome.kind is not OutcomeKind.CENSORED
    cause = None
    if outcome.kind is OutcomeKind.DEFAULTED:
        cause = Cause.DEFAULT
    elif outcome.kind is OutcomeKind.REPAID:
        cause = Cause.PREPAY
    return ObservedLoan(
        entry_age=record.loan_age_at_entry + 1,
        exit_age=record.loan_age_at_entry + outcome.event_month,
        observed_event=observed,
        cause=cause,
        loan_id=record.loan_id,
        band=record.band,
    )


def build_observations(records, policy: FilterPolicy = FilterPolicy(),
                       pad: Decimal = DEFAULT_PAD) -> list[ObservedLoan]:
    """Filter, classify, and convert loan records into observations.

    Output is ordered by loan_id so parallel upstream processing cannot
    change the result.
    """
    out = []
    for rec in filter_loans(records, policy):
        if rec.history is None:
            raise SchemaError(f"loan {rec.loan_id} has no payment history")
        outcome = determine_outcome(rec.history, pad=pad)
        out.append(to_observation(rec, outcome))
    out.sort(key=lambda o: o.loan_id)
    return out


# ---------------------------------------------------------------------------
# CSV input/output

_LOAN_COLUMNS = [
    "loan_id", "apr_pct", "original_amount", "original_term",
    "loan_age_at_entry", "has_coborrower", "income_verification",
    "subvention", "vehicle_condition", "initial_status", "recovered_amount",
]
_PAYMENT_COLUMNS = ["loan_id", "trust_month", "balance", "payment", "principal"]
_OBS_COLUMNS = ["loan_id", "band", "entry_age", "exit_age", "event", "cause"]

_TRUE = {"true", "1", "yes", "y", "t"}
_FALSE = {"false", "0", "no", "n", "f"}


def _parse_bool(raw: str, column: str, where: str) -> bool:
    key = raw.strip().lower()
    if key in _TRUE:
        return True
    if key in _FALSE:
        return False
    raise SchemaError(f"{where}: column {column!r} has non-boolean value {raw!r}")


def _parse_int(raw: str, column: str, where: str) -> int:
    try:
        return int(raw.strip())
    except ValueError:
        raise SchemaError(f"{where}: column {column!r} has non-integer value {raw!r}") from None


def _parse_decimal(raw: str, column: str, where: str, allow_missing: bool = False):
    text = raw.strip()
    if text == "" or text.upper() == "NA":
        if allow_missing:
            return None
        raise SchemaError(f"{where}: column {column!r} is missing a value")
    try:
        return Decimal(text)
    except InvalidOperation:
        raise SchemaError(f"{where}: column {column!r} has non-numeric value {raw!r}") from None


def _check_header(reader: csv.DictReader, required, where: str) -> None:
    have = reader.fieldnames or []
    missing = [c for c in required if c not in have]
    if missing:
        raise SchemaError(f"{where}: missing required column(s) {', '.join(missing)}")


def load_loan_data(loans_path: str | Path, payments_path: str | Path) -> list[LoanRecord]:
    """Read the static and long CSVs and return records with histories attached."""
    records = _read_static_csv(loans_path)
    histories = _read_long_csv(payments_path)
    for rec in records:
        hist = histories.get(rec.loan_id)
        if hist is not None:
            rec.history = hist
    return records


def _read_static_csv(path: str | Path) -> list[LoanRecord]:
    where = str(path)
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader, _LOAN_COLUMNS, where)
        for i, row in enumerate(reader, start=2):
            loc = f"{where}:{i}"
            try:
                apr = float(row["apr_pct"])
            except ValueError:
                raise SchemaError(f"{loc}: column 'apr_pct' has non-numeric value "
                                  f"{row['apr_pct']!r}") from None
            records.append(LoanRecord(
                loan_id=row["loan_id"].strip(),
                apr_pct=apr,
                original_amount=_parse_decimal(row["original_amount"], "original_amount", loc),
                original_term=_parse_int(row["original_term"], "original_term", loc),
                loan_age_at_entry=_parse_int(row["loan_age_at_entry"], "loan_age_at_entry", loc),
                has_coborrower=_parse_bool(row["has_coborrower"], "has_coborrower", loc),
                income_verification=row["income_verification"].strip(),
                subvention=_parse_bool(row["subvention"], "subvention", loc),
                vehicle_condition=row["vehicle_condition"].strip(),
                initial_status=row["initial_status"].strip(),
                recovered_amount=_parse_decimal(row["recovered_amount"], "recovered_amount", loc),
            ))
    return records


def _read_long_csv(path: str | Path) -> dict[str, PaymentHistory]:
    where = str(path)
    rows: dict[str, list] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader, _PAYMENT_COLUMNS, where)
        for i, row in enumerate(reader, start=2):
            loc = f"{where}:{i}"
            loan_id = row["loan_id"].strip()
            month = _parse_int(row["trust_month"], "trust_month", loc)
            bal = _parse_decimal(row["balance"], "balance", loc, allow_missing=True)
            pmt = _parse_decimal(row["payment"], "payment", loc)
            prc = _parse_decimal(row["principal"], "principal", loc)
            rows.setdefault(loan_id, []).append((month, bal, pmt, prc))
    histories = {}
    for loan_id, entries in rows.items():
        entries.sort(key=lambda e: e[0])
        months = [e[0] for e in entries]
        if months != list(range(1, len(months) + 1)):
            raise SchemaError(f"{where}: loan {loan_id} trust_month values are not "
                              f"a contiguous 1..{len(months)} sequence")
        histories[loan_id] = PaymentHistory(
            balance=tuple(e[1] for e in entries),
            payment=tuple(e[2] for e in entries),
            principal=tuple(e[3] for e in entries),
        )
    return histories


def write_loans_csv(path: str | Path, records) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_LOAN_COLUMNS)
        for rec in records:
            writer.writerow([
                rec.loan_id, repr(rec.apr_pct), str(rec.original_amount),
                rec.original_term, rec.loan_age_at_entry,
                str(rec.has_coborrower).lower(), rec.income_verification,
                str(rec.subvention).lower(), rec.vehicle_condition,
                rec.initial_status, str(rec.recovered_amount),
            ])


def write_payments_csv(path: str | Path, records) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_PAYMENT_COLUMNS)
        for rec in records:
            if rec.history is None:
                continue
            hist = rec.history
            for m in range(hist.months):
                bal = "" if hist.balance[m] is None else str(hist.balance[m])
                writer.writerow([rec.loan_id, m + 1, bal,
                                 str(hist.payment[m]), str(hist.principal[m])])


def write_observations_csv(path: str | Path, observations) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_OBS_COLUMNS)
        for obs in observations:
            writer.writerow([
                obs.loan_id,
                obs.band.label if obs.band is not None else "",
                obs.entry_age,
                obs.exit_age,
                int(obs.observed_event),
                obs.cause.label if obs.cause is not None else "",
            ])


def read_observations_csv(path: str | Path) -> list[ObservedLoan]:
    where = str(path)
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _check_header(reader, _OBS_COLUMNS, where)
        for i, row in enumerate(reader, start=2):
            loc = f"{where}:{i}"
            event = _parse_bool(row["event"], "event", loc)
            cause_raw = row["cause"].strip()
            cause = Cause.from_label(cause_raw) if cause_raw else None
            band_raw = row["band"].strip()
            try:
                band = RiskBand.from_label(band_raw) if band_raw else None
            except ValueError as exc:
                raise SchemaError(f"{loc}: {exc}") from None
            out.append(ObservedLoan(
                entry_age=_parse_int(row["entry_age"], "entry_age", loc),
                exit_age=_parse_int(row["exit_age"], "exit_age", loc),
                observed_event=event,
                cause=cause,
                loan_id=row["loan_id"].strip(),
                band=band,
            ))
    return out
