"""
SMOTE oversampling: pick a random target-class case x, one of its k nearest
target-class neighbors z, and emit x + lam * (z - x) on the numeric features.
Categorical features are copied from x.
"""

import logging
from dataclasses import dataclass
from typing import List

import numpy as np

from src.config import SMOTE_K
from src.data.casebase import Case, CaseBase, FeatureValue
from src.errors import AugmentationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SmoteSample:
    case: Case
    base_id: int
    neighbor_id: int
    gap: float


def interpolate(x: Case, z: Case, gap: float, numeric: List[int]) -> tuple:
    values: List[FeatureValue] = list(x.features)
    for i in numeric:
        a, b = float(x.features[i]), float(z.features[i])
        values[i] = a + gap * (b - a)
    return tuple(values)


def smote_with_parents(
    casebase: CaseBase, target_class: int, k: int = SMOTE_K, n_needed: int = 1, seed: int = 0
) -> List[SmoteSample]:
    members = casebase.class_members(target_class)
    if len(members) < 2:
        raise AugmentationError(
            f"SMOTE needs at least 2 cases of class {target_class}, found {len(members)}"
        )
    if k < 1 or n_needed < 0:
        raise AugmentationError("k must be at least 1 and n_needed non-negative")
    k_eff = min(k, len(members) - 1)
    if k_eff < k:
        logger.debug(f"Only {len(members)} members; using k={k_eff}")

    member_ids = np.array([m.id for m in members])
    positions = np.array([casebase.position(m.id) for m in members])
    # each member's k nearest other members, by case distance then id
    neighbors = []
    for m in members:
        distances = casebase.distances_to(m.features)[positions]
        others = member_ids != m.id
        order = np.lexsort((member_ids[others], distances[others]))[:k_eff]
        neighbors.append(member_ids[others][order])

    numeric = casebase.scaler.numeric_indices
    rng = np.random.default_rng(seed)
    next_id = casebase.next_id
    samples: List[SmoteSample] = []
    for _ in range(n_needed):
        base = int(rng.integers(len(members)))
        neighbor_id = int(rng.choice(neighbors[base]))
        gap = float(rng.random())
        x, z = members[base], casebase.by_id(neighbor_id)
        case = Case(id=next_id, features=interpolate(x, z, gap, numeric), label=target_class)
        samples.append(SmoteSample(case, x.id, neighbor_id, gap))
        next_id += 1

    logger.info(f"SMOTE: {len(samples)} synthetic cases for class {target_class} (k={k_eff}, seed={seed})")
    return samples


def smote(
    casebase: CaseBase, target_class: int, k: int = SMOTE_K, n_needed: int = 1, seed: int = 0
) -> List[Case]:
    return [s.case for s in smote_with_parents(casebase, target_class, k, n_needed, seed)]
