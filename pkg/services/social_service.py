# File: services/social_service.py (Small-world contact network and awareness spreading by e-mail)

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Union

import networkx as nx
import numpy as np

from errors import InvalidParams
from models import Activity, ContactEvent, EnergyUser, SimTime
from schemas import NetworkDocument
from services.behavior_service import awareness_to_probabilities
from services.random_streams import geometric_delay, uniform_int

logger = logging.getLogger(__name__)

MAX_AWARENESS = 100.0


@dataclass
class SocialNetwork:
    graph: nx.Graph
    k: int = 0
    p_rewire: float = 0.0
    _neighbors: Dict[int, List[int]] = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        self._neighbors = {int(node): sorted(int(v) for v in self.graph.neighbors(node)) for node in self.graph.nodes}

    @property
    def n(self) -> int:
        return self.graph.number_of_nodes()

    @property
    def edge_count(self) -> int:
        return self.graph.number_of_edges()

    def neighbors(self, node: int) -> List[int]:
        return self._neighbors.get(node, [])

    def degree(self, node: int) -> int:
        return len(self.neighbors(node))


def build_small_world(n: int, k: int, p_rewire: float, seed: int) -> SocialNetwork:
    """Ring of n nodes joined to k neighbours per side, each edge rewired with probability p_rewire."""
    if k < 1 or n <= 2 * k:
        raise InvalidParams(f"a small world needs n > 2k (got n={n}, k={k})")
    if not 0.0 <= p_rewire <= 1.0:
        raise InvalidParams(f"p_rewire must lie in [0, 1] (got {p_rewire})")
    graph = nx.watts_strogatz_graph(n, 2 * k, p_rewire, seed=int(seed))
    network = SocialNetwork(graph, k=k, p_rewire=p_rewire)
    logger.debug(f"🕸️ Small world built: n={n} k={k} p={p_rewire} edges={network.edge_count}")
    return network


def complete_network(n: int) -> SocialNetwork:
    """Everyone knows everyone; used when the roster is too small for a ring lattice."""
    return SocialNetwork(nx.complete_graph(n))


def network_from_document(document: Union[NetworkDocument, dict]) -> SocialNetwork:
    """Network from an explicit edge list; node ids are user ids 0..n-1."""
    if isinstance(document, dict):
        document = NetworkDocument.model_validate(document)
    graph = nx.Graph()
    graph.add_nodes_from(range(document.n))
    for a, b in document.edges:
        if not (0 <= a < document.n and 0 <= b < document.n):
            raise InvalidParams(f"edge ({a}, {b}) refers to a node outside 0..{document.n - 1}")
        if a == b:
            raise InvalidParams(f"self-loop on node {a}")
        if graph.has_edge(a, b):
            raise InvalidParams(f"edge ({a}, {b}) listed twice")
        graph.add_edge(a, b)
    return SocialNetwork(graph)


def mean_shortest_path(network: SocialNetwork) -> float:
    """Mean shortest-path length over all connected ordered pairs."""
    total = 0
    pairs = 0
    for _, lengths in nx.all_pairs_shortest_path_length(network.graph):
        for distance in lengths.values():
            if distance > 0:
                total += distance
                pairs += 1
    return total / pairs if pairs else 0.0


# --- E-mail clock ---

def contact_hazard(user: EnergyUser, contact_rate: float, working_minutes: int = 480) -> float:
    """Per in-office-minute probability of sending an e-mail."""
    _, p_email = awareness_to_probabilities(user.awareness)
    return min(1.0, contact_rate * p_email / working_minutes)


def reset_contact_clock(user: EnergyUser, contact_rate: float, rng: np.random.Generator,
                        working_minutes: int = 480) -> None:
    """Start a new day: zero the in-office minute count and schedule the first e-mail."""
    user.office_minutes = 0
    user.next_contact_minute = None
    if contact_rate > 0:
        hazard = contact_hazard(user, contact_rate, working_minutes)
        user.next_contact_minute = geometric_delay(rng.random(), hazard)


def contact_due_tick(user: EnergyUser) -> Optional[int]:
    """Tick of the next e-mail if the user stays in the office, else None."""
    if user.office_entered_tick is None or user.next_contact_minute is None:
        return None
    return user.office_entered_tick + (user.next_contact_minute - user.office_minutes)


def emit_contacts(
    user: EnergyUser,
    contact_rate: float,
    clock: Union[int, SimTime],
    network: SocialNetwork,
    rng: np.random.Generator,
    *,
    recipient_rng: Optional[np.random.Generator] = None,
    working_minutes: int = 480,
) -> List[ContactEvent]:
    """
    E-mails the user sends this tick. Only in-office minutes advance the clock;
    a rate of 0 never draws.
    """
    t = clock.minute_of_sim if isinstance(clock, SimTime) else int(clock)
    if contact_rate <= 0 or user.state.activity is not Activity.IN_OWN_OFFICE:
        return []
    due = contact_due_tick(user)
    if due is None or t < due:
        return []

    minute_now = user.office_minutes + (t - user.office_entered_tick)
    hazard = contact_hazard(user, contact_rate, working_minutes)
    user.next_contact_minute = minute_now + geometric_delay(rng.random(), hazard)

    neighbors = network.neighbors(user.id)
    if not neighbors:
        return []
    pick = (recipient_rng if recipient_rng is not None else rng).random()
    return [ContactEvent(user.id, neighbors[uniform_int(pick, 0, len(neighbors))], t)]


def apply_contact(recipient: EnergyUser, delta: float) -> EnergyUser:
    """Raise the recipient's awareness by delta, capped at 100. Probabilities follow the new band."""
    if delta < 0:
        raise InvalidParams(f"awareness delta must be >= 0 (got {delta})")
    recipient.awareness = min(MAX_AWARENESS, recipient.awareness + delta)
    return recipient
