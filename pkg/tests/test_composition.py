"""Combined graph construction."""
import math
import random

from hypothesis import given, settings
from hypothesis import strategies as st

from masabs.composition import combine, location_reachable, restrict_to_reachable_locations
from masabs.lang import MASGraph
from masabs.parser import parse_mas
from masabs.randgen import GenParams, random_mas
from masabs.unwrapping import unwrap

from oracle import explore, model_graph

seeds = st.integers(0, 10**6)


def test_asv_product_and_reachable(asv):
    G = combine(asv)
    assert len(G.locations) == 8
    R = restrict_to_reachable_locations(G)
    assert set(R.locations) == {("idle", "idle"), ("voted", "idle"), ("obeyed", "halt"),
                                ("disobeyed", "halt")}
    assert set(combine(asv, reachable_only=True).locations) == set(R.locations)


def test_no_sync_labels_and_provenance(asv):
    for e in combine(asv).edges:
        assert e.sync is None
        assert 1 <= len(e.provenance) <= 2


def test_single_agent_is_identity():
    S = parse_mas("agent A {\n  var x : 0..2\n  loc a, b\n  init a\n"
                  "  edge a -> b [x < 2] do x := x + 1\n  edge b -> a\n}\n")
    G = combine(S)
    A = S.agents[0]
    assert G.locations == tuple((l,) for l in A.locations)
    assert [(e.src, e.dst, e.guard, e.update) for e in G.edges] == \
        [((e.src,), (e.dst,), e.guard, e.update) for e in A.edges]


def test_one_handshake():
    S = parse_mas("system s {\n  chan c\n}\n"
                  "agent A {\n  loc a, b\n  init a\n  edge a -> b sync c!\n}\n"
                  "agent B {\n  loc u, v\n  init u\n  edge u -> v sync c?\n}\n")
    G = combine(S)
    assert len(G.edges) == 1
    e = G.edges[0]
    assert (e.src, e.dst) == (("a", "u"), ("b", "v"))


def test_sender_update_first(small_text):
    # P sends c with s := x after x := x + 1; Q receives with y := s
    S = parse_mas(small_text)
    M = unwrap(S)
    after = [M.env(s) for s in range(M.n_states) if M.locations[s] == ("b", "v")]
    assert after and all(env["Q.y"] == env["s"] == env["P.x"] for env in after)


def test_isolated_initial_location():
    S = parse_mas("agent A {\n  loc a, b\n  init a\n  edge b -> a\n}\n")
    assert restrict_to_reachable_locations(combine(S)).locations == (("a",),)


def test_fully_connected_restrict_is_identity():
    S = parse_mas("agent A {\n  loc a, b\n  init a\n  edge a -> b\n  edge b -> a\n}\n"
                  "agent B {\n  loc u, v\n  init u\n  edge u -> v\n  edge v -> u\n}\n")
    G = combine(S)
    assert restrict_to_reachable_locations(G).locations == G.locations


@given(seeds)
@settings(max_examples=60, deadline=None)
def test_edge_count_without_channels(seed):
    S = random_mas(random.Random(seed), GenParams(max_channels=0))
    G = combine(S)
    sizes = [len(a.locations) for a in S.agents]
    want = sum(len(a.edges) * math.prod(sizes[:i] + sizes[i + 1:]) for i, a in enumerate(S.agents))
    assert len(G.edges) == want


@given(seeds, st.randoms())
@settings(max_examples=60, deadline=None)
def test_agent_order_commutes(seed, r):
    S = random_mas(random.Random(seed))
    perm = list(range(len(S.agents)))
    r.shuffle(perm)
    T = MASGraph(S.shared_vars, tuple(S.agents[p] for p in perm), S.channels, S.g0, S.name)

    def canon(G, order):
        def loc(l):
            return tuple(l[order.index(i)] for i in range(len(order)))
        return sorted((loc(e.src), loc(e.dst), str(e.guard), str(e.update)) for e in G.edges)

    assert canon(combine(S), list(range(len(perm)))) == canon(combine(T), perm)


@given(seeds)
@settings(max_examples=80, deadline=None)
def test_unwrap_matches_direct_exploration(seed):
    S = random_mas(random.Random(seed))
    assert model_graph(unwrap(S)) == explore(S)


@given(seeds)
@settings(max_examples=40, deadline=None)
def test_reachable_only_matches_restriction(seed):
    S = random_mas(random.Random(seed))
    full = combine(S)
    assert set(combine(S, reachable_only=True).locations) == location_reachable(full)
