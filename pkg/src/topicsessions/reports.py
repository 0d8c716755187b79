"""JSON serialisation of reports and traces."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from typing import Any

from . import __version__
from .calculus import TAU, Message, Tau, Trace, Value
from .checker import SessionReport
from .oracle import SafetyReport, Violation
from .properties import PropertyReport


def digest(text: str) -> str:
    return "sha256:" + hashlib.sha256(text.encode("utf-8")).hexdigest()


def value_to_json(v: Value) -> dict:
    return {"payload": v.payload, "sort": v.sort, "level": v.level, "topic": v.topic}


def action_to_json(a) -> dict:
    if isinstance(a, Tau):
        return {"tau": True}
    return {"from": a.sender, "to": a.receiver, "label": a.label, "value": value_to_json(a.value)}


def trace_to_json(trace: Trace) -> list[dict]:
    return [action_to_json(a) for a in trace]


def trace_from_json(data: list[dict]) -> Trace:
    out = []
    for item in data:
        if item.get("tau"):
            out.append(TAU)
        else:
            v = item["value"]
            out.append(
                Message(item["from"], item["to"], item["label"], Value(v["payload"], v["sort"], v["level"], v["topic"]))
            )
    return tuple(out)


def finding(kind: str, indices=(), trace: Trace = (), detail: str = "") -> dict:
    return {"kind": kind, "indices": list(indices), "trace": trace_to_json(trace), "detail": detail}


def report(command: str, verdict: str, source: str, findings: list[dict], **extra: Any) -> dict:
    doc = {
        "version": __version__,
        "command": command,
        "verdict": verdict,
        "input_digest": digest(source),
        "findings": findings,
    }
    doc.update(extra)
    return doc


def violation_finding(v: Violation) -> dict:
    return finding(v.kind, v.indices, v.trace, v.explanation)


def safety_report(rep: SafetyReport, source: str) -> dict:
    return report(
        "oracle",
        "safe" if rep.safe else "unsafe",
        source,
        [violation_finding(v) for v in rep.violations],
        depth=rep.depth,
        traces_explored=rep.traces_explored,
    )


def session_report(rep: SessionReport, source: str) -> dict:
    findings = [finding(kind, detail=msg) for kind, msg in rep.errors]
    findings += [
        finding(v.error, detail=f"{v.participant}: {v.message}") for v in rep.verdicts if not v.ok
    ]
    participants = [
        {
            "participant": v.participant,
            "ok": v.ok,
            "projection": None if v.projection is None else str(v.projection),
            "type": None if v.process_type is None else str(v.process_type),
            "error": v.error,
            "path": list(v.path),
        }
        for v in rep.verdicts
    ]
    return report("check", "ok" if rep.ok else "ill-typed", source, findings, participants=participants)


def property_report(command: str, rep: PropertyReport, source: str) -> dict:
    findings = []
    if not rep.passed:
        findings.append(finding(rep.name, trace=tuple(rep.witness), detail=rep.detail))
    return report(command, rep.verdict, source, findings, vacuous=rep.vacuous, detail=rep.detail, stats=rep.stats)


def write_json(doc: dict, path: str) -> None:
    """Write ``doc`` to ``path`` in one step ("-" means stdout)."""
    text = json.dumps(doc, indent=2, ensure_ascii=False) + "\n"
    if path == "-":
        print(text, end="")
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".report-")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)
