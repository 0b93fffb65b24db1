"""Association policies selectable by name."""

from __future__ import annotations

from .baselines import LBH, RBH, SBH, SMART, LbhParams, SmartParams
from .sqa import SQA, SqaParams

POLICY_NAMES = ("SQA", "SBH", "RBH", "LBH", "SMART")


def make_policy(name: str, sqa: SqaParams | None = None, smart: SmartParams | None = None,
                lbh: LbhParams | None = None):
    key = name.upper()
    if key == "SQA":
        return SQA(sqa)
    if key == "SBH":
        return SBH()
    if key == "RBH":
        return RBH()
    if key == "SMART":
        return SMART(smart)
    if key == "LBH":
        return LBH(lbh)
    raise ValueError(f"unknown policy {name!r}; expected one of {POLICY_NAMES}")


__all__ = ["LBH", "POLICY_NAMES", "RBH", "SBH", "SMART", "SQA", "LbhParams", "SmartParams", "SqaParams",
           "make_policy"]
