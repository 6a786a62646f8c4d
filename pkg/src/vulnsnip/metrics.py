"""Confusion-matrix accounting and Acc/Pre/Rec/F1.

The vulnerable class ("bad") is the positive class: TP counts samples
predicted bad that are bad. Zero-denominator metrics report 0 and raise the
zero_division flag instead of failing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .dataset import LABELS


@dataclass
class Confusion:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass
class Metrics:
    acc: float
    pre: float
    rec: float
    f1: float
    zero_division: bool = False


def confusion(preds: list[str], truth: list[str]) -> Confusion:
    if len(preds) != len(truth):
        raise ValueError(f"length mismatch: {len(preds)} predictions vs "
                         f"{len(truth)} truth labels")
    c = Confusion()
    for p, t in zip(preds, truth):
        if p not in LABELS or t not in LABELS:
            raise ValueError(f"labels must be in {LABELS}, got ({p!r}, {t!r})")
        if p == "bad" and t == "bad":
            c.tp += 1
        elif p == "bad" and t == "good":
            c.fp += 1
        elif p == "good" and t == "bad":
            c.fn += 1
        else:
            c.tn += 1
    return c


def metrics(c: Confusion) -> Metrics:
    flag = False

    def ratio(num, den):
        nonlocal flag
        if den == 0:
            flag = True
            return 0.0
        return num / den

    acc = ratio(c.tp + c.tn, c.total)
    pre = ratio(c.tp, c.tp + c.fp)
    rec = ratio(c.tp, c.tp + c.fn)
    f1 = ratio(2 * pre * rec, pre + rec) if (pre + rec) > 0 else 0.0
    if (pre + rec) == 0:
        flag = True
    return Metrics(acc=acc, pre=pre, rec=rec, f1=f1, zero_division=flag)


def format_metrics(m: Metrics, title: str = "") -> str:
    head = f"{'':<12} {'Acc':>8} {'Rec':>8} {'Pre':>8} {'F1':>8}"
    row = (f"{title:<12} {m.acc * 100:>8.2f} {m.rec * 100:>8.2f} "
           f"{m.pre * 100:>8.2f} {m.f1 * 100:>8.2f}")
    note = "  (zero-division encountered)" if m.zero_division else ""
    return head + "\n" + row + note


def metrics_json(m: Metrics, c: Confusion | None = None) -> str:
    obj = {
        "acc": round(m.acc * 100, 2),
        "rec": round(m.rec * 100, 2),
        "pre": round(m.pre * 100, 2),
        "f1": round(m.f1 * 100, 2),
        "zero_division": m.zero_division,
    }
    if c is not None:
        obj["confusion"] = {"tp": c.tp, "fp": c.fp, "fn": c.fn, "tn": c.tn}
    return json.dumps(obj, indent=2)
