# File: crud/population_crud.py (Roster generation from stereotype mixes)

import logging
import math
from typing import List, Sequence

from errors import InvalidParams
from models import (
    AWARENESS_STEREOTYPES,
    AwarenessKind,
    EnergyUser,
    WorkKind,
)
from schemas import FRACTION_TOLERANCE, PopulationSpec
from services.random_streams import StreamPurpose, counter_stream

logger = logging.getLogger(__name__)

WORK_ORDER = (WorkKind.EARLY_BIRD, WorkKind.TIMETABLE_COMPLIER, WorkKind.FLEXIBLE_WORKER)
AWARENESS_ORDER = (
    AwarenessKind.ENVIRONMENT_CHAMPION,
    AwarenessKind.ENERGY_SAVER,
    AwarenessKind.REGULAR_USER,
    AwarenessKind.BIG_USER,
)


def apportion(n: int, fractions: Sequence[float]) -> List[int]:
    """
    Largest-remainder rounding of n * fractions. Counts always sum to n;
    equal remainders go to the earlier category.
    """
    if n < 0:
        raise InvalidParams(f"cannot apportion {n} users")
    if abs(sum(fractions) - 1.0) > FRACTION_TOLERANCE:
        raise InvalidParams(f"fractions must sum to 1 (got {sum(fractions)!r})")
    quotas = [n * f for f in fractions]
    counts = [math.floor(q + 1e-9) for q in quotas]
    remainders = [q - c for q, c in zip(quotas, counts)]
    leftover = n - sum(counts)
    by_remainder = sorted(range(len(fractions)), key=lambda i: (-remainders[i], i))
    for i in by_remainder[:leftover]:
        counts[i] += 1
    return counts


def generate_population(spec: PopulationSpec, seed: int) -> List[EnergyUser]:
    """Users 0..n-1 with shuffled work and awareness kinds and a per-user awareness draw."""
    n = spec.n_users
    work_counts = apportion(n, spec.work_mix)
    awareness_counts = apportion(n, spec.awareness_mix)

    rng = counter_stream(seed, StreamPurpose.POPULATION)
    work_kinds = [kind for kind, count in zip(WORK_ORDER, work_counts) for _ in range(count)]
    awareness_kinds = [kind for kind, count in zip(AWARENESS_ORDER, awareness_counts) for _ in range(count)]
    work_perm = rng.permutation(n)
    awareness_perm = rng.permutation(n)
    draws = rng.random(n)

    roster: List[EnergyUser] = []
    for user_id in range(n):
        awareness_kind = awareness_kinds[int(awareness_perm[user_id])]
        low, high = AWARENESS_STEREOTYPES[awareness_kind].band
        roster.append(
            EnergyUser(
                id=user_id,
                work_kind=work_kinds[int(work_perm[user_id])],
                awareness_kind=awareness_kind,
                awareness=float(low + draws[user_id] * (high - low)),
                p_weekend=spec.p_weekend,
            )
        )

    logger.info(
        f"👥 Generated {n} energy users (work {dict(zip([k.value for k in WORK_ORDER], work_counts))}, "
        f"awareness {dict(zip([k.value for k in AWARENESS_ORDER], awareness_counts))})"
    )
    return roster
