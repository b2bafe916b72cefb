"""Device/contact store: normalization, mutation rules, snapshot durability."""

from __future__ import annotations

import json
import os
import random
import signal
import subprocess
import sys
import textwrap
import time

import pytest

from sosdispatch.registry import (
    BadCharacter,
    BadDeviceId,
    BadLength,
    ContactLimitReached,
    CorruptSnapshot,
    DEFAULT_CUSTOM_MESSAGE,
    DuplicateContact,
    EmptyMessage,
    MessageTooLong,
    MissingPlus,
    Registry,
    UnknownContact,
    UnknownDevice,
    load_snapshot,
    save_snapshot,
    validate_msisdn,
)


class TestValidateMsisdn:
    def test_already_canonical(self):
        assert validate_msisdn("+15551234567") == "+15551234567"

    def test_separator_stripping(self):
        assert validate_msisdn("+1 (555) 123-4567") == "+15551234567"

    def test_sixteen_digits_rejected(self):
        with pytest.raises(BadLength):
            validate_msisdn("+1234567890123456")

    def test_seven_digits_rejected(self):
        with pytest.raises(BadLength):
            validate_msisdn("+1234567")

    def test_eight_digits_accepted(self):
        assert validate_msisdn("+12345678") == "+12345678"

    def test_fifteen_digits_accepted(self):
        assert validate_msisdn("+123456789012345") == "+123456789012345"

    def test_missing_plus(self):
        with pytest.raises(MissingPlus):
            validate_msisdn("15551234567")

    def test_letters_rejected(self):
        with pytest.raises(BadCharacter):
            validate_msisdn("+1555CALLNOW")

    def test_unicode_digits_rejected(self):
        with pytest.raises(BadCharacter):
            validate_msisdn("+١٥٥٥١٢٣٤٥٦٧")


class TestDevices:
    def test_register_fresh(self):
        reg = Registry()
        profile = reg.register_device("d1", now=1000)
        assert profile.contacts == []
        assert profile.custom_message == DEFAULT_CUSTOM_MESSAGE
        assert profile.created_at == 1000

    def test_register_idempotent(self):
        reg = Registry()
        reg.register_device("d1", now=1000)
        reg.add_contact("d1", "+15551234567", "Mom", now=1001)
        again = reg.register_device("d1", now=2000)
        assert again.created_at == 1000
        assert len(again.contacts) == 1

    @pytest.mark.parametrize("bad", ["d 1", "", "a" * 65, "dév1", "d/1"])
    def test_bad_device_id(self, bad):
        with pytest.raises(BadDeviceId):
            Registry().register_device(bad, now=1)

    def test_unknown_device(self):
        with pytest.raises(UnknownDevice):
            Registry().get_device("nope")


class TestContacts:
    @pytest.fixture
    def reg(self):
        reg = Registry()
        reg.register_device("d1", now=1)
        return reg

    def test_add(self, reg):
        contact = reg.add_contact("d1", "+15551234567", "Mom", now=2)
        assert contact.msisdn == "+15551234567"
        assert reg.contacts("d1") == [contact]

    def test_duplicate_after_normalization(self, reg):
        reg.add_contact("d1", "+15551234567", "Mom", now=2)
        with pytest.raises(DuplicateContact):
            reg.add_contact("d1", "+1 555-123-4567", "Mum", now=3)

    def test_limit_of_twenty(self, reg):
        for i in range(20):
            reg.add_contact("d1", f"+1555123{i:04d}", "", now=i)
        with pytest.raises(ContactLimitReached):
            reg.add_contact("d1", "+15559999999", "", now=99)

    def test_remove_preserves_order(self, reg):
        for i in range(3):
            reg.add_contact("d1", f"+1555123000{i}", "", now=i)
        removed = reg.remove_contact("d1", "+15551230001")
        assert removed.msisdn == "+15551230001"
        assert [c.msisdn for c in reg.contacts("d1")] == ["+15551230000", "+15551230002"]

    def test_remove_unknown(self, reg):
        with pytest.raises(UnknownContact):
            reg.remove_contact("d1", "+15551234567")

    def test_remove_then_readd(self, reg):
        reg.add_contact("d1", "+15551234567", "Mom", now=2)
        reg.remove_contact("d1", "+15551234567")
        reg.add_contact("d1", "+15551234567", "Mom again", now=3)
        assert len(reg.contacts("d1")) == 1

    def test_unknown_device(self, reg):
        with pytest.raises(UnknownDevice):
            reg.add_contact("d2", "+15551234567", "", now=2)


class TestCustomMessage:
    @pytest.fixture
    def reg(self):
        reg = Registry()
        reg.register_device("d1", now=1)
        return reg

    def test_set(self, reg):
        reg.set_custom_message("d1", "I need help!")
        assert reg.custom_message("d1") == "I need help!"

    def test_whitespace_only_rejected(self, reg):
        with pytest.raises(EmptyMessage):
            reg.set_custom_message("d1", "   ")

    def test_201_chars_rejected(self, reg):
        with pytest.raises(MessageTooLong):
            reg.set_custom_message("d1", "x" * 201)

    def test_200_chars_accepted(self, reg):
        reg.set_custom_message("d1", "x" * 200)
        assert len(reg.custom_message("d1")) == 200

    def test_interior_whitespace_kept_verbatim(self, reg):
        reg.set_custom_message("d1", "  help   me  ")
        assert reg.custom_message("d1") == "help   me"


def random_store(rng: random.Random) -> Registry:
    reg = Registry()
    for d in range(rng.randrange(0, 5)):
        device_id = f"dev-{rng.randrange(10**6)}-{d}"
        reg.register_device(device_id, now=rng.randrange(1, 2**40))
        if rng.random() < 0.8:
            reg.set_custom_message(device_id, rng.choice(["Help!", "SOS, à l'aide vite", "救命", "x" * 200]))
        numbers = rng.sample(range(10**7, 2 * 10**7), rng.randrange(0, 8))
        for n in numbers:
            reg.add_contact(device_id, f"+91{n:08d}", rng.choice(["", "Mom", "Aïda", "警察"]), now=rng.randrange(1, 2**40))
    return reg


class TestSnapshot:
    def test_round_trip(self, tmp_path):
        reg = Registry()
        reg.register_device("d1", now=1)
        reg.register_device("d2", now=2)
        reg.add_contact("d1", "+15551234567", "Mom", now=3)
        reg.add_contact("d1", "+15557654321", "Dad", now=4)
        reg.add_contact("d2", "+919999000001", "Neighbour", now=5)
        path = str(tmp_path / "reg.json")
        save_snapshot(reg, path)
        assert load_snapshot(path) == reg

    def test_empty_store(self, tmp_path):
        path = str(tmp_path / "reg.json")
        save_snapshot(Registry(), path)
        assert load_snapshot(path) == Registry()

    def test_truncated_file(self, tmp_path):
        path = str(tmp_path / "reg.json")
        save_snapshot(random_store(random.Random(1)), path)
        data = open(path, "rb").read()
        with open(path, "wb") as fh:
            fh.write(data[: len(data) // 2])
        with pytest.raises(CorruptSnapshot):
            load_snapshot(path)

    def test_unknown_fields_ignored(self, tmp_path):
        reg = Registry()
        reg.register_device("d1", now=1)
        path = str(tmp_path / "reg.json")
        save_snapshot(reg, path)
        doc = json.load(open(path))
        doc["future_global"] = {"x": 1}
        doc["devices"][0]["future_field"] = 42
        json.dump(doc, open(path, "w"))
        assert load_snapshot(path) == reg

    def test_wrong_version(self, tmp_path):
        path = str(tmp_path / "reg.json")
        json.dump({"v": 99, "devices": []}, open(path, "w"))
        with pytest.raises(CorruptSnapshot):
            load_snapshot(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CorruptSnapshot):
            load_snapshot(str(tmp_path / "absent.json"))

    def test_load_save_identity_over_random_stores(self, tmp_path):
        path = str(tmp_path / "reg.json")
        for seed in range(200):
            reg = random_store(random.Random(seed))
            save_snapshot(reg, path)
            assert load_snapshot(path) == reg, f"seed {seed}"

    def test_crash_before_rename_keeps_old_snapshot(self, tmp_path, monkeypatch):
        path = str(tmp_path / "reg.json")
        old = random_store(random.Random(7))
        save_snapshot(old, path)

        def exploding_replace(src, dst):
            raise OSError("simulated crash before rename")

        monkeypatch.setattr(os, "replace", exploding_replace)
        with pytest.raises(OSError):
            save_snapshot(random_store(random.Random(8)), path)
        monkeypatch.undo()
        assert load_snapshot(path) == old
        # no temp litter left behind
        assert [p for p in os.listdir(tmp_path) if p.endswith(".tmp")] == []

    def test_kill_during_save_loop_leaves_loadable_snapshot(self, tmp_path):
        path = tmp_path / "reg.json"
        script = textwrap.dedent(
            f"""
            import random, sys
            sys.path.insert(0, {str(os.path.dirname(__file__))!r})
            from test_registry import random_store
            from sosdispatch.registry import save_snapshot
            print("ready", flush=True)
            i = 0
            while True:
                save_snapshot(random_store(random.Random(i)), {str(path)!r})
                i += 1
            """
        )
        proc = subprocess.Popen(
            [sys.executable, "-c", script], stdout=subprocess.PIPE, stderr=subprocess.PIPE
        )
        try:
            assert proc.stdout.readline().strip() == b"ready"
            time.sleep(0.3)
        finally:
            proc.send_signal(signal.SIGKILL)
            proc.wait(timeout=10)
        load_snapshot(str(path))  # must parse: old or new, never a hybrid


class TestModelCheck:
    """Random add/remove sequences against a plain dict model."""

    def test_random_operation_sequences(self):
        for seed in range(30):
            rng = random.Random(seed)
            reg = Registry()
            reg.register_device("d1", now=1)
            model: dict[str, str] = {}
            pool = [f"+91{n:08d}" for n in range(10**7, 10**7 + 12)]
            for step in range(200):
                number = rng.choice(pool)
                if rng.random() < 0.6:
                    try:
                        reg.add_contact("d1", number, "L", now=step)
                        added = True
                    except DuplicateContact:
                        added = False
                    except ContactLimitReached:
                        added = False
                        assert len(model) >= 20
                    if added:
                        assert number not in model
                        model[number] = "L"
                else:
                    try:
                        reg.remove_contact("d1", number)
                        assert number in model
                        del model[number]
                    except UnknownContact:
                        assert number not in model
                got = [c.msisdn for c in reg.contacts("d1")]
                assert got == list(model)  # same contents, same order
                assert len(set(got)) == len(got)  # uniqueness invariant
