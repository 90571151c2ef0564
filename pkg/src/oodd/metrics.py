"""Detection metrics: AUROC, score threshold at fixed TPR, FPR, decisions.

Conventions, fixed once here so every caller agrees:

  * Higher score means more in-distribution.  ID samples are the positive
    class for AUROC.
  * AUROC is the Mann-Whitney U statistic normalized by n_id * n_ood, with
    tied ID/OOD pairs counted as half.  Computed via tie-averaged ranks in
    one sort, which is algebraically identical to counting all pairs.
  * The threshold tau at target TPR t is the ceil(t * n_id)-th largest ID
    score: an actual observed score (order statistic), no interpolation.
    By construction at least t of ID scores are >= tau.
  * FPR at that threshold is the fraction of OOD scores >= tau, matching
    the ID-side decision rule (score >= tau means accept as ID).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyScoresError, OutOfRangeError

# Absorbs float noise in t * n before ceil: 0.95 * 100 must give rank 95,
# never 96 because the product landed at 95.00000000000001.
_CEIL_EPS = 1e-9


class Decision(enum.Enum):
    ID = "id"
    OOD = "ood"


def decide(score: float, tau: float) -> Decision:
    """Accept as ID when score >= tau; the boundary itself is ID."""
    return Decision.ID if score >= tau else Decision.OOD


def _as_scores(x, side: str) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64).ravel()
    if a.size == 0:
        raise EmptyScoresError(f"no {side} scores given")
    if not np.isfinite(a).all():
        raise OutOfRangeError(f"{side} scores contain NaN or Inf")
    return a


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their group's average rank."""
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        # positions i..j (0-based) share the average of ranks i+1..j+1
        ranks[order[i : j + 1]] = (i + j + 2) / 2.0
        i = j + 1
    return ranks


def auroc(id_scores, ood_scores) -> float:
    """P(random ID score > random OOD score) + 0.5 * P(equal)."""
    pos = _as_scores(id_scores, "ID")
    neg = _as_scores(ood_scores, "OOD")
    ranks = _average_ranks(np.concatenate([pos, neg]))
    u = ranks[: pos.size].sum() - pos.size * (pos.size + 1) / 2.0
    return float(u / (pos.size * neg.size))


def threshold_at_tpr(id_scores, tpr: float = 0.95) -> float:
    """The ceil(tpr * n)-th largest ID score."""
    if not 0.0 < tpr <= 1.0:
        raise OutOfRangeError(f"target TPR must be in (0, 1], got {tpr}")
    pos = _as_scores(id_scores, "ID")
    rank = math.ceil(tpr * pos.size - _CEIL_EPS)
    rank = min(max(rank, 1), pos.size)
    return float(np.sort(pos)[::-1][rank - 1])


def fpr_at_tpr(id_scores, ood_scores, tpr: float = 0.95) -> float:
    """Fraction of OOD scores accepted as ID at the TPR-derived threshold."""
    tau = threshold_at_tpr(id_scores, tpr)
    neg = _as_scores(ood_scores, "OOD")
    return float((neg >= tau).sum() / neg.size)


@dataclass(frozen=True)
class EvalResult:
    auroc: float
    fpr95: float
    tau: float
    n_id: int
    n_ood: int


def evaluate(id_scores, ood_scores, tpr: float = 0.95) -> EvalResult:
    pos = _as_scores(id_scores, "ID")
    neg = _as_scores(ood_scores, "OOD")
    tau = threshold_at_tpr(pos, tpr)
    return EvalResult(
        auroc=auroc(pos, neg),
        fpr95=float((neg >= tau).sum() / neg.size),
        tau=tau,
        n_id=pos.size,
        n_ood=neg.size,
    )


def evaluate_by_source(
    id_scores,
    ood_by_source: dict[str, np.ndarray],
    groups: dict[str, list[str]] | None = None,
    tpr: float = 0.95,
) -> dict[str, EvalResult]:
    """Per-OOD-source metrics against one shared ID score set.

    groups maps a group name (for example "near", "far") to member source
    names; each group row is the unweighted mean of its members' auroc and
    fpr95.  tau in a group row is the shared ID threshold, n_ood the total.
    """
    if not ood_by_source:
        raise EmptyScoresError("no OOD sources given")
    out: dict[str, EvalResult] = {}
    for name, scores in ood_by_source.items():
        out[name] = evaluate(id_scores, scores, tpr)
    for gname, members in (groups or {}).items():
        missing = [m for m in members if m not in out]
        if missing:
            raise EmptyScoresError(f"group {gname!r} references unknown sources {missing}")
        if not members:
            raise EmptyScoresError(f"group {gname!r} has no members")
        out[gname] = EvalResult(
            auroc=float(np.mean([out[m].auroc for m in members])),
            fpr95=float(np.mean([out[m].fpr95 for m in members])),
            tau=out[members[0]].tau,
            n_id=out[members[0]].n_id,
            n_ood=int(sum(out[m].n_ood for m in members)),
        )
    return out
