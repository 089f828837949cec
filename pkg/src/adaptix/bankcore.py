"""Demo banking backend: accounts, balances and an append-only journal.

The journal is line-delimited JSON, one committed entry per line with a
fixed field order. Replaying it rebuilds every balance exactly. Payments
to the outside world (tickets, recharges, bills...) are transfers into a
per-service sink account, so the sum of all balances only changes when an
account is opened.
"""

from __future__ import annotations

import json
import logging
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Any, Callable

log = logging.getLogger(__name__)

SINK_PREFIX = "sink:"
FIELD_ORDER = ("seq", "ts", "kind", "debit", "credit", "amount_cents", "owner")


class BankError(Exception):
    pass


class InsufficientFunds(BankError):
    pass


class UnknownAccount(BankError, KeyError):
    def __str__(self):
        return f"unknown account {self.args[0]!r}"


class SelfTransfer(BankError):
    pass


class CorruptJournal(BankError):
    def __init__(self, seq: int | None, message: str):
        super().__init__(f"journal corrupt at seq {seq}: {message}")
        self.seq = seq


@dataclass
class Account:
    account_id: str
    owner: str
    balance_cents: int = 0


@dataclass(frozen=True)
class JournalEntry:
    seq: int
    ts: float
    kind: str
    debit: str | None
    credit: str | None
    amount_cents: int
    owner: str | None = None

    def to_line(self) -> str:
        return json.dumps({k: getattr(self, k) for k in FIELD_ORDER}, separators=(",", ":")) + "\n"

    def touches(self, account_id: str) -> bool:
        return account_id in (self.debit, self.credit)


class Store:
    """Account store with serialized commits.

    ``clock`` supplies entry timestamps; simulation passes a virtual clock so
    journals are reproducible.
    """

    def __init__(self, journal_path: str | Path | None = None, *, fsync: bool = False,
                 clock: Callable[[], float] | None = None):
        self.accounts: dict[str, Account] = {}
        self.journal: list[JournalEntry] = []
        self.journal_path = Path(journal_path) if journal_path else None
        self.fsync = fsync
        self.clock = clock or (lambda: 0.0)
        self._lock = threading.Lock()
        self._fh: IO[str] | None = None

    # -- persistence ---------------------------------------------------

    def _write(self, entry: JournalEntry) -> None:
        if self.journal_path is None:
            return
        if self._fh is None:
            self._fh = open(self.journal_path, "a", encoding="utf-8")
        self._fh.write(entry.to_line())
        self._fh.flush()
        if self.fsync:
            os.fsync(self._fh.fileno())

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def _apply(self, entry: JournalEntry) -> None:
        if entry.kind == "Open":
            self.accounts[entry.credit] = Account(entry.credit, entry.owner or "", entry.amount_cents)
        else:
            self.accounts[entry.debit].balance_cents -= entry.amount_cents
            self.accounts[entry.credit].balance_cents += entry.amount_cents
        self.journal.append(entry)

    def _commit(self, kind, debit, credit, amount, owner=None) -> JournalEntry:
        entry = JournalEntry(len(self.journal) + 1, float(self.clock()), kind, debit, credit, amount, owner)
        self._write(entry)
        self._apply(entry)
        return entry

    # -- operations ------------------------------------------------------

    def open_account(self, account_id: str, owner: str, initial_cents: int = 0) -> JournalEntry:
        if initial_cents < 0:
            raise ValueError("initial balance must be non-negative")
        with self._lock:
            if account_id in self.accounts:
                raise BankError(f"account {account_id!r} already exists")
            return self._commit("Open", None, account_id, int(initial_cents), owner)

    def ensure_account(self, account_id: str, owner: str, initial_cents: int = 0) -> Account:
        with self._lock:
            if account_id not in self.accounts:
                self._commit("Open", None, account_id, int(initial_cents), owner)
            return self.accounts[account_id]

    def transfer(self, src: str, dst: str, amount_cents: int, kind: str = "Transfer") -> JournalEntry:
        if not isinstance(amount_cents, int) or amount_cents <= 0:
            raise ValueError("amount must be a positive integer number of cents")
        with self._lock:
            for acct in (src, dst):
                if acct not in self.accounts:
                    raise UnknownAccount(acct)
            if src == dst:
                raise SelfTransfer(src)
            if self.accounts[src].balance_cents < amount_cents:
                raise InsufficientFunds(f"{src} has {self.accounts[src].balance_cents}, needs {amount_cents}")
            return self._commit(kind, src, dst, amount_cents)

    def pay(self, src: str, service_id: str, amount_cents: int, kind: str) -> JournalEntry:
        sink = SINK_PREFIX + service_id
        self.ensure_account(sink, "bank")
        return self.transfer(src, sink, amount_cents, kind)

    def balance(self, account_id: str) -> int:
        try:
            return self.accounts[account_id].balance_cents
        except KeyError:
            raise UnknownAccount(account_id) from None

    def history(self, account_id: str, start: int = 0, stop: int | None = None) -> list[JournalEntry]:
        """Entries touching the account, in seq order, sliced ``[start:stop]``."""
        if account_id not in self.accounts:
            raise UnknownAccount(account_id)
        return [e for e in self.journal if e.touches(account_id)][start:stop]

    def total_balance(self) -> int:
        return sum(a.balance_cents for a in self.accounts.values())

    def balances(self) -> dict[str, int]:
        return {k: a.balance_cents for k, a in self.accounts.items()}


def recover(journal_path: str | Path) -> Store:
    """Rebuild a store by replaying its journal.

    A damaged final record (a crash mid-write) is dropped with a warning;
    damage anywhere else raises CorruptJournal.
    """
    path = Path(journal_path)
    store = Store()
    if not path.exists():
        return store
    raw = path.read_text(encoding="utf-8")
    lines = raw.splitlines(keepends=True)
    for i, line in enumerate(lines):
        last = i == len(lines) - 1
        expected = len(store.journal) + 1
        try:
            data = json.loads(line)
            if not line.endswith("\n"):
                raise ValueError("record not terminated")
            entry = JournalEntry(**{k: data[k] for k in FIELD_ORDER})
        except (ValueError, KeyError, TypeError) as exc:
            if last:
                log.warning("discarding truncated journal record after seq %d", expected - 1)
                break
            raise CorruptJournal(expected, str(exc)) from exc
        if entry.seq != expected:
            raise CorruptJournal(expected, f"found seq {entry.seq}")
        try:
            if entry.kind != "Open":
                for acct in (entry.debit, entry.credit):
                    if acct not in store.accounts:
                        raise UnknownAccount(acct)
                if store.accounts[entry.debit].balance_cents < entry.amount_cents:
                    raise InsufficientFunds(entry.debit)
            store._apply(entry)
        except BankError as exc:
            raise CorruptJournal(entry.seq, str(exc)) from exc
    if lines and not lines[-1].endswith("\n") and len(store.journal) == len(lines):
        pass
    store.journal_path = path
    if len(store.journal) < len(lines):
        # drop the torn tail so new commits start on a clean line
        path.write_text("".join(e.to_line() for e in store.journal), encoding="utf-8")
    return store


# -- service handlers --------------------------------------------------

DEFAULT_FEES = {
    "railway_ticket": 450_00,
    "mobile_recharge": 199_00,
    "bill_payment": 1200_00,
    "tax_payment": 2500_00,
    "online_dd": 1000_00,
    "third_party_payment": 500_00,
    "cheque_book_request": 50_00,
}

_KINDS = {
    "railway_ticket": "RailwayTicket",
    "mobile_recharge": "Recharge",
    "bill_payment": "BillPay",
    "tax_payment": "TaxPay",
    "online_dd": "DemandDraft",
    "third_party_payment": "ThirdPartyPay",
    "cheque_book_request": "ChequeBookFee",
}


def account_of(user_id: str) -> str:
    return f"acct:{user_id}"


def make_handlers(store: Store) -> dict[str, Callable[[Any], Any]]:
    """One handler per default catalog service.

    Handlers take a gateway request (``.user`` and ``.payload``) and return
    a JSON-ready result.
    """

    def _entry(e: JournalEntry) -> dict:
        return {k: getattr(e, k) for k in FIELD_ORDER}

    def _own(req) -> str:
        return account_of(req.user.user_id)

    def balance_inquiry(req):
        return {"account": _own(req), "balance_cents": store.balance(_own(req))}

    def transaction_history(req):
        limit = int(req.payload.get("limit", 10))
        entries = store.history(_own(req))
        return {"account": _own(req), "entries": [_entry(e) for e in entries[-limit:]] if limit else []}

    def account_statement(req):
        acct = _own(req)
        return {
            "account": acct,
            "balance_cents": store.balance(acct),
            "entries": [_entry(e) for e in store.history(acct)],
        }

    def _transfer(req):
        p = req.payload
        dst = p.get("to_account") or (account_of(p["to_user"]) if "to_user" in p else None)
        if dst is None:
            raise ValueError("payload needs to_account or to_user")
        return _entry(store.transfer(_own(req), dst, int(p["amount_cents"])))

    def _payment(service_id):
        def handler(req):
            amount = int(req.payload.get("amount_cents", DEFAULT_FEES[service_id]))
            return _entry(store.pay(_own(req), service_id, amount, _KINDS[service_id]))

        handler.__name__ = service_id
        return handler

    handlers = {
        "balance_inquiry": balance_inquiry,
        "fund_transfer": _transfer,
        "third_party_transfer": _transfer,
        "transaction_history": transaction_history,
        "account_statement": account_statement,
    }
    for sid in DEFAULT_FEES:
        handlers[sid] = _payment(sid)
    return handlers
