"""`sos-sim`: scenario-driven device simulator.

Reads a JSON scenario (devices, ordered steps, expectations), drives a
running gateway over plain HTTP, polls triggered alerts to their terminal
states, and reports one pass/fail line per expectation. Exit code 0 iff all
expectations pass.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from typing import Any

import httpx

DEFAULT_POLL_TIMEOUT_S = 10.0
TERMINAL_STATES = {"delivered", "partially_delivered", "failed"}

# Fields excluded when comparing two reports for determinism.
VOLATILE_REPORT_FIELDS = {"started_at_ms", "finished_at_ms", "duration_ms"}


class ScenarioParseError(Exception):
    def __init__(self, path: str, reason: str) -> None:
        super().__init__(f"{path}: {reason}")
        self.path = path
        self.reason = reason


class GatewayUnreachable(Exception):
    pass


class ExpectationTimeout(Exception):
    pass


@dataclass(frozen=True)
class ContactSpec:
    number: str
    label: str = ""


@dataclass(frozen=True)
class DeviceSpec:
    device_id: str
    contacts: tuple[ContactSpec, ...]
    custom_message: str | None = None


@dataclass(frozen=True)
class TriggerStep:
    device_id: str
    trigger_id: str
    fix: dict | None = None
    cell: dict | None = None


@dataclass(frozen=True)
class WaitStep:
    ms: int


@dataclass(frozen=True)
class InjectFailureStep:
    msisdn: str
    plan: tuple[Any, ...]


Step = TriggerStep | WaitStep | InjectFailureStep


@dataclass(frozen=True)
class Expectation:
    kind: str  # alert_state | delivered_count | message_contains
    trigger_id: str
    expected_state: str | None = None
    count: int | None = None
    substring: str | None = None


@dataclass(frozen=True)
class Scenario:
    name: str
    devices: tuple[DeviceSpec, ...]
    steps: tuple[Step, ...]
    expectations: tuple[Expectation, ...]


def _need(doc: dict, key: str, kind: type, path: str) -> Any:
    value = doc.get(key)
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise ScenarioParseError(f"{path}.{key}", f"must be {kind.__name__}")
    return value


def _parse_device(doc: Any, path: str) -> DeviceSpec:
    if not isinstance(doc, dict):
        raise ScenarioParseError(path, "must be an object")
    device_id = _need(doc, "device_id", str, path)
    raw_contacts = doc.get("contacts", [])
    if not isinstance(raw_contacts, list):
        raise ScenarioParseError(f"{path}.contacts", "must be a list")
    contacts = []
    for i, entry in enumerate(raw_contacts):
        if isinstance(entry, str):
            contacts.append(ContactSpec(number=entry))
        elif isinstance(entry, dict):
            contacts.append(
                ContactSpec(
                    number=_need(entry, "number", str, f"{path}.contacts[{i}]"),
                    label=entry.get("label", ""),
                )
            )
        else:
            raise ScenarioParseError(f"{path}.contacts[{i}]", "must be a string or object")
    custom = doc.get("custom_message")
    if custom is not None and not isinstance(custom, str):
        raise ScenarioParseError(f"{path}.custom_message", "must be a string")
    return DeviceSpec(device_id=device_id, contacts=tuple(contacts), custom_message=custom)


def _parse_step(doc: Any, path: str, device_ids: set[str]) -> Step:
    if not isinstance(doc, dict):
        raise ScenarioParseError(path, "must be an object")
    kind = _need(doc, "type", str, path)
    if kind == "trigger":
        device_id = _need(doc, "device_id", str, path)
        if device_id not in device_ids:
            raise ScenarioParseError(f"{path}.device_id", f"unknown device {device_id!r}")
        fix = doc.get("fix")
        cell = doc.get("cell")
        if fix is not None and not isinstance(fix, dict):
            raise ScenarioParseError(f"{path}.fix", "must be an object")
        if cell is not None and not isinstance(cell, dict):
            raise ScenarioParseError(f"{path}.cell", "must be an object")
        return TriggerStep(
            device_id=device_id,
            trigger_id=_need(doc, "trigger_id", str, path),
            fix=fix,
            cell=cell,
        )
    if kind == "wait":
        ms = _need(doc, "ms", int, path)
        if ms < 0:
            raise ScenarioParseError(f"{path}.ms", "must be >= 0")
        return WaitStep(ms=ms)
    if kind == "inject_failure":
        plan = _need(doc, "plan", list, path)
        return InjectFailureStep(msisdn=_need(doc, "msisdn", str, path), plan=tuple(plan))
    raise ScenarioParseError(f"{path}.type", f"unknown step type {kind!r}")


def _parse_expectation(doc: Any, path: str, trigger_ids: set[str]) -> Expectation:
    if not isinstance(doc, dict):
        raise ScenarioParseError(path, "must be an object")
    kind = _need(doc, "type", str, path)
    trigger_id = _need(doc, "trigger_id", str, path)
    if trigger_id not in trigger_ids:
        raise ScenarioParseError(f"{path}.trigger_id", f"{trigger_id!r} never triggered in steps")
    if kind == "alert_state":
        return Expectation(kind, trigger_id, expected_state=_need(doc, "expected", str, path))
    if kind == "delivered_count":
        return Expectation(kind, trigger_id, count=_need(doc, "n", int, path))
    if kind == "message_contains":
        return Expectation(kind, trigger_id, substring=_need(doc, "substring", str, path))
    raise ScenarioParseError(f"{path}.type", f"unknown expectation type {kind!r}")


def parse_scenario(data: bytes | str) -> Scenario:
    """Parse and validate a scenario document; errors carry the JSON path."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError("$", f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioParseError("$", "root must be an object")
    name = _need(doc, "name", str, "$")
    raw_devices = doc.get("devices", [])
    if not isinstance(raw_devices, list):
        raise ScenarioParseError("$.devices", "must be a list")
    devices = tuple(_parse_device(d, f"devices[{i}]") for i, d in enumerate(raw_devices))
    device_ids = {d.device_id for d in devices}
    if len(device_ids) != len(devices):
        raise ScenarioParseError("$.devices", "duplicate device_id")

    raw_steps = doc.get("steps", [])
    if not isinstance(raw_steps, list):
        raise ScenarioParseError("$.steps", "must be a list")
    steps = tuple(_parse_step(s, f"steps[{i}]", device_ids) for i, s in enumerate(raw_steps))
    trigger_ids = {s.trigger_id for s in steps if isinstance(s, TriggerStep)}

    raw_expectations = doc.get("expectations", [])
    if not isinstance(raw_expectations, list):
        raise ScenarioParseError("$.expectations", "must be a list")
    expectations = tuple(
        _parse_expectation(e, f"expectations[{i}]", trigger_ids)
        for i, e in enumerate(raw_expectations)
    )
    return Scenario(name=name, devices=devices, steps=steps, expectations=expectations)


@dataclass
class Report:
    scenario: str
    gateway: str
    seed: int
    passed: bool = False
    steps: list[dict] = field(default_factory=list)
    expectations: list[dict] = field(default_factory=list)
    started_at_ms: int = 0
    finished_at_ms: int = 0

    def to_json(self) -> dict:
        return {
            "scenario": self.scenario,
            "gateway": self.gateway,
            "seed": self.seed,
            "pass": self.passed,
            "steps": self.steps,
            "expectations": self.expectations,
            "started_at_ms": self.started_at_ms,
            "finished_at_ms": self.finished_at_ms,
            "duration_ms": self.finished_at_ms - self.started_at_ms,
        }

    def to_text(self) -> str:
        lines = [f"scenario: {self.scenario} (seed {self.seed}) against {self.gateway}"]
        for step in self.steps:
            lines.append(f"  step {step['index']}: {step['describe']}")
        for exp in self.expectations:
            mark = "PASS" if exp["pass"] else "FAIL"
            lines.append(f"{mark} expectation {exp['index']}: {exp['describe']} ({exp['detail']})")
        lines.append("result: " + ("ALL EXPECTATIONS PASSED" if self.passed else "FAILURES"))
        return "\n".join(lines)


def strip_volatile(report_json: dict) -> dict:
    return {k: v for k, v in report_json.items() if k not in VOLATILE_REPORT_FIELDS}


def _now_ms() -> int:
    return int(time.time() * 1000)


class ScenarioRunner:
    def __init__(
        self,
        gateway_url: str,
        seed: int = 0,
        poll_timeout_s: float = DEFAULT_POLL_TIMEOUT_S,
        client: httpx.Client | None = None,
    ) -> None:
        self.gateway_url = gateway_url.rstrip("/")
        self.seed = seed
        self.poll_timeout_s = poll_timeout_s
        self._client = client or httpx.Client(base_url=self.gateway_url, timeout=10.0)
        self._alert_ids: dict[str, str] = {}

    def _salted(self, trigger_id: str) -> str:
        # Same seed -> same ids -> gateway idempotency makes re-runs read the
        # same alerts; different seeds get fresh alerts on a shared gateway.
        return f"{trigger_id}.{self.seed}"

    def _request(self, method: str, path: str, **kwargs) -> httpx.Response:
        try:
            return self._client.request(method, path, **kwargs)
        except httpx.HTTPError as exc:
            raise GatewayUnreachable(f"{method} {path}: {exc}") from exc

    def _setup_devices(self, scenario: Scenario) -> None:
        for device in scenario.devices:
            resp = self._request("POST", "/devices", json={"device_id": device.device_id})
            if resp.status_code not in (200, 201):
                raise GatewayUnreachable(f"device registration failed: {resp.status_code} {resp.text}")
            if device.custom_message is not None:
                resp = self._request(
                    "PUT",
                    f"/devices/{device.device_id}/message",
                    json={"text": device.custom_message},
                )
                if resp.status_code != 204:
                    raise GatewayUnreachable(f"set message failed: {resp.status_code} {resp.text}")
            for contact in device.contacts:
                resp = self._request(
                    "POST",
                    f"/devices/{device.device_id}/contacts",
                    json={"number": contact.number, "label": contact.label},
                )
                if resp.status_code not in (201, 409):  # 409: already there from a prior run
                    raise GatewayUnreachable(f"add contact failed: {resp.status_code} {resp.text}")

    def _run_step(self, index: int, step: Step, report: Report) -> None:
        entry: dict[str, Any] = {"index": index, "ok": True}
        if isinstance(step, TriggerStep):
            body: dict[str, Any] = {"trigger_id": self._salted(step.trigger_id)}
            if step.fix is not None:
                fix = dict(step.fix)
                fix.setdefault("fixed_at", _now_ms())
                body["fix"] = fix
            if step.cell is not None:
                body["cell"] = step.cell
            resp = self._request("POST", f"/devices/{step.device_id}/sos", json=body)
            if resp.status_code not in (200, 202):
                raise GatewayUnreachable(f"trigger failed: {resp.status_code} {resp.text}")
            alert_id = resp.json()["alert_id"]
            self._alert_ids[step.trigger_id] = alert_id
            entry["describe"] = f"trigger {step.trigger_id} on {step.device_id}"
            entry["alert_id"] = alert_id
        elif isinstance(step, WaitStep):
            time.sleep(step.ms / 1000)
            entry["describe"] = f"wait {step.ms} ms"
        else:
            resp = self._request(
                "POST",
                "/_mock/failure-plan",
                json={"msisdn": step.msisdn, "plan": list(step.plan)},
            )
            if resp.status_code != 204:
                raise GatewayUnreachable(
                    f"failure injection needs a mock-transport gateway: {resp.status_code}"
                )
            entry["describe"] = f"inject failure plan for {step.msisdn}"
        report.steps.append(entry)

    def _poll_terminal(self, trigger_id: str) -> dict:
        alert_id = self._alert_ids[trigger_id]
        deadline = time.monotonic() + self.poll_timeout_s
        while time.monotonic() < deadline:
            resp = self._request("GET", f"/alerts/{alert_id}")
            if resp.status_code != 200:
                raise GatewayUnreachable(f"alert fetch failed: {resp.status_code}")
            view = resp.json()
            if view["state"] in TERMINAL_STATES:
                return view
            time.sleep(0.02)
        raise ExpectationTimeout(f"alert {alert_id} (trigger {trigger_id}) not terminal after {self.poll_timeout_s}s")

    def _evaluate(self, index: int, exp: Expectation, view: dict) -> dict:
        if exp.kind == "alert_state":
            ok = view["state"] == exp.expected_state
            describe = f"alert_state[{exp.trigger_id}] == {exp.expected_state}"
            detail = f"state is {view['state']}"
        elif exp.kind == "delivered_count":
            delivered = sum(1 for d in view["deliveries"] if d["final_status"] == "succeeded")
            ok = delivered == exp.count
            describe = f"delivered_count[{exp.trigger_id}] == {exp.count}"
            detail = f"{delivered} delivered of {len(view['deliveries'])} records"
        else:
            message = view.get("message") or ""
            ok = exp.substring in message
            describe = f"message_contains[{exp.trigger_id}] {exp.substring!r}"
            detail = f"message is {message!r}"
        return {"index": index, "describe": describe, "detail": detail, "pass": ok}

    def run(self, scenario: Scenario) -> Report:
        report = Report(scenario=scenario.name, gateway=self.gateway_url, seed=self.seed)
        report.started_at_ms = _now_ms()
        health = self._request("GET", "/healthz")
        if health.status_code != 200:
            raise GatewayUnreachable(f"healthz returned {health.status_code}")
        self._setup_devices(scenario)
        for i, step in enumerate(scenario.steps):
            self._run_step(i, step, report)
        views = {tid: self._poll_terminal(tid) for tid in self._alert_ids}
        results = [
            self._evaluate(i, exp, views[exp.trigger_id])
            for i, exp in enumerate(scenario.expectations)
        ]
        report.expectations = results
        report.passed = all(r["pass"] for r in results)
        report.finished_at_ms = _now_ms()
        return report


def run_scenario(
    scenario: Scenario,
    gateway_url: str,
    seed: int = 0,
    poll_timeout_s: float = DEFAULT_POLL_TIMEOUT_S,
    client: httpx.Client | None = None,
) -> Report:
    return ScenarioRunner(gateway_url, seed, poll_timeout_s, client).run(scenario)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sos-sim", description="Scenario-driven SOS device simulator."
    )
    parser.add_argument("--gateway", required=True, help="gateway base URL")
    parser.add_argument("--scenario", required=True, help="path to scenario JSON")
    parser.add_argument("--seed", type=int, default=0, help="trigger-id salt (default 0)")
    parser.add_argument("--report", default=None, help="write the JSON report here")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.scenario, "rb") as handle:
            scenario = parse_scenario(handle.read())
    except OSError as exc:
        print(f"sos-sim: cannot read scenario: {exc}", file=sys.stderr)
        return 2
    except ScenarioParseError as exc:
        print(f"sos-sim: bad scenario: {exc}", file=sys.stderr)
        return 2
    try:
        report = run_scenario(scenario, args.gateway, seed=args.seed)
    except (GatewayUnreachable, ExpectationTimeout) as exc:
        print(f"sos-sim: {exc}", file=sys.stderr)
        return 2
    print(report.to_text())
    if args.report:
        with open(args.report, "w", encoding="utf-8") as handle:
            json.dump(report.to_json(), handle, indent=2, sort_keys=True)
            handle.write("\n")
    return 0 if report.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
