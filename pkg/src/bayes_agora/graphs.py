"""Directed social-network graphs, rooted balls, and graph families.

An edge (u, w) means agent u observes agent w.  Graphs are simple (no
loops, no parallel edges) and validated to be strongly connected, which
the dynamics require.  Undirected graphs are represented as directed
graphs closed under edge reversal.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, NamedTuple

from .errors import (
    BadGraphFile,
    DisconnectedAfterRetries,
    NotStronglyConnected,
    NTooSmall,
    UnknownVertex,
    ValidationError,
)
from .seeding import Stream, split
from .signals import as_fraction


@dataclass(frozen=True)
class SocialGraph:
    """Simple, strongly connected directed graph."""

    n: int
    edges: frozenset[tuple[int, int]]
    adjacency: tuple[tuple[int, ...], ...] = field(init=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError(f"graph needs at least one vertex, got n={self.n}")
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, w in self.edges:
            if not (0 <= u < self.n and 0 <= w < self.n):
                raise UnknownVertex(f"edge ({u},{w}) outside vertex range 0..{self.n - 1}")
            if u == w:
                raise ValidationError(f"loop at vertex {u} not allowed")
            adj[u].append(w)
        object.__setattr__(self, "adjacency", tuple(tuple(sorted(a)) for a in adj))
        if not self.is_strongly_connected():
            raise NotStronglyConnected(f"graph with {self.n} vertices is not strongly connected")

    def neighbors(self, u: int) -> tuple[int, ...]:
        return self.adjacency[u]

    def out_degree(self, u: int) -> int:
        return len(self.adjacency[u])

    def max_out_degree(self) -> int:
        return max(self.out_degree(u) for u in range(self.n))

    def is_undirected(self) -> bool:
        return all((w, u) in self.edges for u, w in self.edges)

    def is_strongly_connected(self) -> bool:
        if self.n == 1:
            return True
        fwd = _reachable(self.adjacency, 0)
        if len(fwd) != self.n:
            return False
        rev: list[list[int]] = [[] for _ in range(self.n)]
        for u, w in self.edges:
            rev[w].append(u)
        return len(_reachable(tuple(tuple(a) for a in rev), 0)) == self.n

    def distances_from(self, u: int) -> list[int]:
        """Directed BFS distances; unreachable vertices get -1."""
        if not 0 <= u < self.n:
            raise UnknownVertex(f"vertex {u} outside 0..{self.n - 1}")
        dist = [-1] * self.n
        dist[u] = 0
        q = deque([u])
        while q:
            v = q.popleft()
            for w in self.adjacency[v]:
                if dist[w] < 0:
                    dist[w] = dist[v] + 1
                    q.append(w)
        return dist


def _reachable(adj: tuple[tuple[int, ...], ...], start: int) -> set[int]:
    seen = {start}
    q = deque([start])
    while q:
        v = q.popleft()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                q.append(w)
    return seen


def graph_from_edges(n: int, edges: Iterable[tuple[int, int]]) -> SocialGraph:
    return SocialGraph(n, frozenset((int(u), int(w)) for u, w in edges))


def _undirected(pairs: Iterable[tuple[int, int]]) -> set[tuple[int, int]]:
    out = set()
    for u, w in pairs:
        out.add((u, w))
        out.add((w, u))
    return out


# -- rooted balls ----------------------------------------------------------

@dataclass(frozen=True)
class RootedBall:
    """Induced subgraph of vertices within directed distance `radius` of `root`."""

    vertices: tuple[int, ...]
    edges: frozenset[tuple[int, int]]
    root: int
    radius: int
    distance: dict[int, int]

    @property
    def size(self) -> int:
        return len(self.vertices)

    def out_degree(self, v: int) -> int:
        return sum(1 for (a, _) in self.edges if a == v)

    def adjacency(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {v: [] for v in self.vertices}
        for u, w in self.edges:
            adj[u].append(w)
        return {v: sorted(a) for v, a in adj.items()}


def ball(g: SocialGraph, u: int, r: int) -> RootedBall:
    """BFS ball of radius r around u with induced edges."""
    if not 0 <= u < g.n:
        raise UnknownVertex(f"vertex {u} outside 0..{g.n - 1}")
    if r < 0:
        raise ValidationError(f"radius must be >= 0, got {r}")
    dist = {u: 0}
    q = deque([u])
    while q:
        v = q.popleft()
        if dist[v] == r:
            continue
        for w in g.adjacency[v]:
            if w not in dist:
                dist[w] = dist[v] + 1
                q.append(w)
    verts = tuple(sorted(dist))
    vset = set(verts)
    edges = frozenset((a, b) for (a, b) in g.edges if a in vset and b in vset)
    return RootedBall(verts, edges, u, r, dist)


def rooted_isomorphic(b1: RootedBall, b2: RootedBall) -> tuple[bool, dict[int, int] | None]:
    """Root-preserving graph isomorphism; returns a witness mapping when true.

    Backtracking with (distance-from-root, out-degree, in-degree)
    signatures for pruning; fine for the few-dozen-vertex balls this
    package works with.
    """
    if b1.size != b2.size or len(b1.edges) != len(b2.edges):
        return False, None

    def signature(b: RootedBall) -> dict[int, tuple[int, int, int]]:
        out: dict[int, int] = {v: 0 for v in b.vertices}
        inn: dict[int, int] = {v: 0 for v in b.vertices}
        for a, c in b.edges:
            out[a] += 1
            inn[c] += 1
        return {v: (b.distance[v], out[v], inn[v]) for v in b.vertices}

    sig1, sig2 = signature(b1), signature(b2)
    if sorted(sig1.values()) != sorted(sig2.values()):
        return False, None
    if sig1[b1.root] != sig2[b2.root]:
        return False, None

    # map vertices in BFS order from the root so partial edge checks bite early
    order = sorted(b1.vertices, key=lambda v: (b1.distance[v], v))
    adj1_out: dict[int, set[int]] = {v: set() for v in b1.vertices}
    adj1_in: dict[int, set[int]] = {v: set() for v in b1.vertices}
    for a, c in b1.edges:
        adj1_out[a].add(c)
        adj1_in[c].add(a)
    e2 = b2.edges
    candidates = {v: [w for w in b2.vertices if sig2[w] == sig1[v]] for v in order}

    mapping: dict[int, int] = {}
    used: set[int] = set()

    def extend(k: int) -> bool:
        if k == len(order):
            return True
        v = order[k]
        opts = [b2.root] if v == b1.root else candidates[v]
        for w in opts:
            if w in used:
                continue
            ok = True
            for x in adj1_out[v]:
                if x in mapping and (w, mapping[x]) not in e2:
                    ok = False
                    break
            if ok:
                for x in adj1_in[v]:
                    if x in mapping and (mapping[x], w) not in e2:
                        ok = False
                        break
            if not ok:
                continue
            mapping[v] = w
            used.add(w)
            if extend(k + 1):
                return True
            del mapping[v]
            used.remove(w)
        return False

    if extend(0):
        return True, dict(mapping)
    return False, None


class LocalDistance(NamedTuple):
    value: Fraction
    radius: int
    capped: bool


def local_distance(g1: SocialGraph, u1: int, g2: SocialGraph, u2: int,
                   r_max: int) -> LocalDistance:
    """Rooted-graph metric 2^-R, R the largest radius with isomorphic balls.

    The search is capped at r_max (reported via `capped`); radius-0
    balls are always isomorphic, so the value is at most 2^0 = 1.
    """
    if r_max < 0:
        raise ValidationError(f"r_max must be >= 0, got {r_max}")
    radius = 0
    for r in range(1, r_max + 1):
        iso, _ = rooted_isomorphic(ball(g1, u1, r), ball(g2, u2, r))
        if not iso:
            return LocalDistance(Fraction(1, 2 ** radius), radius, False)
        radius = r
    return LocalDistance(Fraction(1, 2 ** radius), radius, True)


@dataclass(frozen=True)
class LocalProperty:
    """Predicate on rooted graphs decidable from a fixed-radius ball."""

    predicate: Callable[[RootedBall], bool]
    radius: int
    name: str = ""

    def holds(self, g: SocialGraph, u: int) -> bool:
        return bool(self.predicate(ball(g, u, self.radius)))


def is_l_locally_strongly_connected(g: SocialGraph, l: int) -> bool:
    """True iff every edge (u, w) has a directed return path w -> u of length <= l."""
    if l < 1:
        raise ValidationError(f"L must be >= 1, got {l}")
    for u, w in g.edges:
        dist = _bounded_distance(g, w, u, l)
        if dist is None:
            return False
    return True


def _bounded_distance(g: SocialGraph, src: int, dst: int, limit: int) -> int | None:
    if src == dst:
        return 0
    dist = {src: 0}
    q = deque([src])
    while q:
        v = q.popleft()
        if dist[v] == limit:
            continue
        for w in g.adjacency[v]:
            if w not in dist:
                dist[w] = dist[v] + 1
                if w == dst:
                    return dist[w]
                q.append(w)
    return None


# -- named families --------------------------------------------------------

def chain(n: int) -> SocialGraph:
    """Undirected path 0 - 1 - ... - (n-1)."""
    if n < 1:
        raise NTooSmall(f"chain needs n >= 1, got {n}")
    return graph_from_edges(n, _undirected((i, i + 1) for i in range(n - 1)))


def cycle(n: int) -> SocialGraph:
    """Undirected cycle on n >= 3 vertices."""
    if n < 3:
        raise NTooSmall(f"cycle needs n >= 3, got {n}")
    return graph_from_edges(n, _undirected((i, (i + 1) % n) for i in range(n)))


def complete(n: int) -> SocialGraph:
    if n < 1:
        raise NTooSmall(f"complete needs n >= 1, got {n}")
    return graph_from_edges(n, ((u, w) for u in range(n) for w in range(n) if u != w))


def star(n: int) -> SocialGraph:
    """Center 0 bidirectionally connected to n-1 leaves."""
    if n < 2:
        raise NTooSmall(f"star needs n >= 2, got {n}")
    return graph_from_edges(n, _undirected((0, i) for i in range(1, n)))


def royal_family(n: int) -> SocialGraph:
    """Five mutually observing 'royals' watched by a chain of commoners.

    Vertices 0..4 form a clique (both directions).  Vertices 5..n-1 are
    commoners in an undirected chain; every commoner observes all five
    royals, and royal 0 observes commoner 5 so the graph is strongly
    connected without being undirected.
    """
    if n < 7:
        raise NTooSmall(f"royal_family needs n >= 7, got {n}")
    edges: set[tuple[int, int]] = set()
    edges |= {(u, w) for u in range(5) for w in range(5) if u != w}
    edges |= _undirected((i, i + 1) for i in range(5, n - 1))
    edges |= {(c, r) for c in range(5, n) for r in range(5)}
    edges.add((0, 5))
    return graph_from_edges(n, edges)


def gnp_connected(n: int, p, seed: int, max_retries: int = 256) -> SocialGraph:
    """Directed G(n, p) resampled until strongly connected (seeded)."""
    if n < 1:
        raise NTooSmall(f"gnp needs n >= 1, got {n}")
    prob = as_fraction(p)
    if not 0 < prob <= 1:
        raise ValidationError(f"edge probability must be in (0, 1], got {prob}")
    for attempt in range(max_retries):
        stream = Stream(split(seed, n, attempt))
        edges = [(u, w) for u in range(n) for w in range(n)
                 if u != w and stream.below(prob)]
        try:
            return graph_from_edges(n, edges)
        except NotStronglyConnected:
            continue
    raise DisconnectedAfterRetries(
        f"no strongly connected G({n}, {prob}) after {max_retries} seeded attempts"
    )


FAMILIES: dict[str, Callable[..., SocialGraph]] = {
    "chain": chain,
    "cycle": cycle,
    "complete": complete,
    "star": star,
    "royal_family": royal_family,
}


# -- file format -------------------------------------------------------------

def write_graph_file(g: SocialGraph, path: str) -> None:
    """Text format: 'n <count> directed' then one '<u> <w>' pair per line."""
    lines = [f"n {g.n} directed"]
    lines += [f"{u} {w}" for u, w in sorted(g.edges)]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_graph_file(path: str) -> SocialGraph:
    with open(path) as fh:
        raw = [line.strip() for line in fh if line.strip()]
    if not raw:
        raise BadGraphFile(f"{path}: empty graph file")
    head = raw[0].split()
    if len(head) != 3 or head[0] != "n" or head[2] != "directed":
        raise BadGraphFile(f"{path}: first line must be 'n <count> directed', got {raw[0]!r}")
    try:
        n = int(head[1])
    except ValueError:
        raise BadGraphFile(f"{path}: bad vertex count {head[1]!r}") from None
    edges = []
    for line in raw[1:]:
        parts = line.split()
        if len(parts) != 2:
            raise BadGraphFile(f"{path}: bad edge line {line!r}")
        edges.append((int(parts[0]), int(parts[1])))
    return graph_from_edges(n, edges)
