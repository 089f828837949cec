import json
import logging
import random
import threading
from types import SimpleNamespace

import pytest

from adaptix.bankcore import (
    FIELD_ORDER,
    CorruptJournal,
    InsufficientFunds,
    SelfTransfer,
    Store,
    UnknownAccount,
    account_of,
    make_handlers,
    recover,
)
from adaptix.catalog import default_catalog
from adaptix.profiles import UserProfile


def two_accounts(**kw):
    s = Store(**kw)
    s.open_account("A", "alice", 500_00)
    s.open_account("B", "bob", 200_00)
    return s


def test_transfer_arithmetic():
    s = two_accounts()
    e = s.transfer("A", "B", 100_00)
    assert (s.balance("A"), s.balance("B")) == (400_00, 300_00)
    assert e.seq == 3 and e.kind == "Transfer"


def test_transfer_errors_leave_balances():
    s = two_accounts()
    with pytest.raises(InsufficientFunds):
        s.transfer("A", "B", 600_00)
    with pytest.raises(UnknownAccount):
        s.transfer("A", "Z", 1)
    with pytest.raises(SelfTransfer):
        s.transfer("A", "A", 1)
    with pytest.raises(ValueError):
        s.transfer("A", "B", 0)
    assert (s.balance("A"), s.balance("B")) == (500_00, 200_00)
    assert len(s.journal) == 2


def test_balance_and_history():
    s = Store()
    s.open_account("A", "a", 100_00)
    assert s.balance("A") == 100_00
    assert s.history("A", 5, 5) == []
    with pytest.raises(UnknownAccount):
        s.balance("nope")
    with pytest.raises(UnknownAccount):
        s.history("nope")


def test_random_transfers_conserve_and_history_recount():
    rng = random.Random(99)
    s = Store()
    ids = [f"acct{i}" for i in range(5)]
    for i in ids:
        s.open_account(i, i, rng.randint(0, 1000_00))
    total = s.total_balance()
    for _ in range(1000):
        a, b = rng.sample(ids, 2)
        amount = rng.randint(1, 400_00)
        try:
            s.transfer(a, b, amount)
        except InsufficientFunds:
            pass
        assert s.total_balance() == total
        assert all(v >= 0 for v in s.balances().values())
    for i in ids:
        hist = s.history(i)
        assert hist == [e for e in s.journal if i in (e.debit, e.credit)]
        assert [e.seq for e in hist] == sorted(e.seq for e in hist)
    assert [e.seq for e in s.journal] == list(range(1, len(s.journal) + 1))


def test_journal_format(tmp_path):
    p = tmp_path / "j.jsonl"
    s = two_accounts(journal_path=p)
    s.transfer("A", "B", 1)
    s.close()
    lines = p.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 3
    assert all(list(json.loads(line)) == list(FIELD_ORDER) for line in lines)


def test_recover_round_trip(tmp_path):
    p = tmp_path / "j.jsonl"
    s = two_accounts(journal_path=p)
    s.transfer("A", "B", 123)
    s.close()
    r = recover(p)
    assert r.balances() == s.balances()
    assert r.journal == s.journal


def test_recover_truncated_tail(tmp_path, caplog):
    p = tmp_path / "j.jsonl"
    s = two_accounts(journal_path=p)
    s.transfer("A", "B", 5)
    s.close()
    raw = p.read_text(encoding="utf-8")
    p.write_text(raw[: len(raw) - 9], encoding="utf-8")
    with caplog.at_level(logging.WARNING):
        r = recover(p)
    assert len(r.journal) == 2 and "truncated" in caplog.text
    assert r.balances() == {"A": 500_00, "B": 200_00}
    # the store keeps appending after the repaired tail
    r.transfer("A", "B", 7)
    r.close()
    assert recover(p).balance("B") == 200_07


def test_recover_mid_file_damage(tmp_path):
    p = tmp_path / "j.jsonl"
    s = two_accounts(journal_path=p)
    s.transfer("A", "B", 5)
    s.close()
    lines = p.read_text(encoding="utf-8").splitlines(keepends=True)
    lines[1] = '{"seq": 2, garbage\n'
    p.write_text("".join(lines), encoding="utf-8")
    with pytest.raises(CorruptJournal) as err:
        recover(p)
    assert err.value.seq == 2


def test_recover_gap_is_corruption(tmp_path):
    p = tmp_path / "j.jsonl"
    s = two_accounts(journal_path=p)
    s.transfer("A", "B", 5)
    s.close()
    lines = p.read_text(encoding="utf-8").splitlines(keepends=True)
    p.write_text(lines[0] + lines[2], encoding="utf-8")
    with pytest.raises(CorruptJournal):
        recover(p)


def test_recover_empty(tmp_path):
    p = tmp_path / "j.jsonl"
    p.write_text("")
    assert recover(p).accounts == {}
    assert recover(tmp_path / "missing.jsonl").accounts == {}


def test_concurrent_transfers_never_negative():
    s = Store()
    for i in range(4):
        s.open_account(str(i), str(i), 1000)
    total = s.total_balance()

    def hammer(seed):
        rng = random.Random(seed)
        for _ in range(500):
            a, b = rng.sample("0123", 2)
            try:
                s.transfer(a, b, rng.randint(1, 300))
            except InsufficientFunds:
                pass

    threads = [threading.Thread(target=hammer, args=(i,)) for i in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert s.total_balance() == total
    assert min(s.balances().values()) >= 0


def test_handlers_cover_catalog_and_conserve():
    s = Store()
    handlers = make_handlers(s)
    assert set(handlers) == set(default_catalog().ids)
    alice, bob = UserProfile("alice", 30), UserProfile("bob", 50)
    s.open_account(account_of("alice"), "alice", 100_000_00)
    s.open_account(account_of("bob"), "bob", 0)
    total = s.total_balance()
    payloads = {
        "fund_transfer": {"to_user": "bob", "amount_cents": 10_00},
        "third_party_transfer": {"to_account": account_of("bob"), "amount_cents": 5_00},
    }
    for sid, h in handlers.items():
        out = h(SimpleNamespace(user=alice, payload=payloads.get(sid, {})))
        assert out is not None
        # sink accounts open with zero balance, so the total only moves with Open entries
        assert s.total_balance() == total
    assert s.balance(account_of("bob")) == 15_00
    assert s.balance("sink:railway_ticket") > 0
    hist = handlers["transaction_history"](SimpleNamespace(user=bob, payload={"limit": 1}))
    assert len(hist["entries"]) == 1
