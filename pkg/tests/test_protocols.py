from __future__ import annotations

import json

import numpy as np
import pytest

from meshcast.engine import Reception, SimConfig, default_max_rounds, resolve_round, run_protocol
from meshcast.errors import CollisionError, ConfigError
from meshcast.graph import from_edges, generate_graph, path_graph, star_graph
from meshcast.harness import export_schedule, import_schedule, reexport_schedule
from meshcast.protocols import (DecayBroadcast, DecayState, FaultlessBroadcast, FaultlessSchedule,
                                MultiMessageBroadcast, RobustBroadcast, contract_supernodes,
                                decay_decide, decay_phase_len, default_block_size, phase_kind,
                                slow_coloring, split_stretch)
from meshcast.protocols.decay import phase_success_probability
from meshcast.ranking import NodeClass, build_sgst, make_sgst
from meshcast.rng import StreamSet

from conftest import CORPUS

# --- Decay ------------------------------------------------------------------------------


def test_decay_phase_len():
    assert decay_phase_len(2) == 2 and decay_phase_len(1024) == 11 and decay_phase_len(1) == 2


def test_decay_level_one_is_half():
    st = DecayState(5, np.ones(20000, dtype=bool))
    u = np.random.default_rng(0).random(20000)
    assert abs(decay_decide(st, u).mean() - 0.5) < 0.015
    st.round_in_phase = 3
    assert abs(decay_decide(st, u).mean() - 0.125) < 0.01


def test_decay_empty_informed():
    st = DecayState(3, np.zeros(10, dtype=bool))
    assert not decay_decide(st, np.zeros(10)).any()


def test_decay_state_cycles():
    st = DecayState(3, np.ones(1, dtype=bool))
    seen = []
    for _ in range(7):
        seen.append(st.round_in_phase)
        st.advance()
    assert seen == [1, 2, 3, 1, 2, 3, 1]


def test_decay_two_node_phase_probability():
    assert phase_success_probability(2) == pytest.approx(5 / 8)
    g = path_graph(2)
    ok = sum(run_protocol(g, DecayBroadcast(0), SimConfig(seed=3, trial_id=i), max_rounds=2).success
             for i in range(8000))
    assert abs(ok / 8000 - 5 / 8) < 0.02


def test_decay_path2_median():
    comps = [run_protocol(path_graph(2), DecayBroadcast(0), SimConfig(seed=1, trial_id=i)).completion_round
             for i in range(301)]
    assert np.median(comps) <= 2 * decay_phase_len(2)


def test_decay_star():
    tr = run_protocol(star_graph(6), DecayBroadcast(0), SimConfig(seed=4))
    assert tr.success and (tr.informed_round >= 0).all()


def test_decay_bipartite_push():
    """One phase on a random bipartite layer informs each right node w.p. >= 1/4."""
    rng = np.random.default_rng(9)
    hits = total = 0
    for inst in range(60):
        nl, nr = int(rng.integers(1, 12)), int(rng.integers(1, 12))
        hub, left, right = 0, range(1, 1 + nl), range(1 + nl, 1 + nl + nr)
        edges = {(hub, l) for l in left}
        for r in right:
            edges.add((int(rng.choice(list(left))), r))
            for l in left:
                if rng.random() < 0.3:
                    edges.add((l, r))
        g = from_edges(1 + nl + nr, sorted(edges))
        informed = np.zeros(g.n, dtype=bool)
        informed[list(left)] = True
        L = decay_phase_len(g.n)
        for rep in range(20):
            ss = StreamSet(inst, rep, g.n)
            got = np.zeros(g.n, dtype=bool)
            st = DecayState(L, informed)
            for t in range(1, L + 1):
                st.round_in_phase = t
                tx = decay_decide(st, ss.uniforms(1, t))
                got |= resolve_round(g, tx, 0.0).status == Reception.MESSAGE
            hits += int(got[list(right)].sum())
            total += nr
    assert hits / total >= 0.25


# --- faultless ----------------------------------------------------------------------------


def test_fast_slot_congruence():
    assert (4 + 9 * 2) % (9 * 3) == 22
    for spec in ["cbt(63)", "grid(7,7)", "expander(20,8)"]:
        g = generate_graph(spec, 2)
        s = build_sgst(g, 0)
        sc = FaultlessSchedule.build(g, s)
        for v in range(g.n):
            if s.fast_child[v] >= 0:
                assert sc.fast_res[v] == (s.layer_of[v] + 9 * s.ranked.rank2[v]) % (9 * s.rmax2)
            else:
                assert sc.fast_res[v] == -1


@pytest.mark.parametrize("spec", CORPUS)
def test_faultless_strict_corpus(spec):
    g = generate_graph(spec, 1)
    s = build_sgst(g, 0)
    proto = FaultlessBroadcast(s, strict=True)
    tr = run_protocol(g, proto, SimConfig(seed=2), record="rounds")
    assert tr.success and tr.stats["attributable_noise"] == 0
    layer = np.asarray(s.layer_of)
    for out in tr.outcomes:
        # active layers are all congruent to t mod 3
        assert set((layer[out.transmitters] - out.round) % 3) <= {0}


def test_faultless_path8_bound():
    s = build_sgst(path_graph(8), 0)
    tr = run_protocol(path_graph(8), FaultlessBroadcast(s), SimConfig())
    assert tr.completion_round <= 7 + 9 * s.rmax2


def test_faultless_cbt_x2_no_fast():
    g = generate_graph("cbt(63)")
    s = build_sgst(g, 0, 2)
    assert not any(c is NodeClass.FAST for c in s.class_of)
    tr = run_protocol(g, FaultlessBroadcast(s, strict=True), SimConfig(seed=5))
    assert tr.success and tr.stats["fast_tx"] == 0


def test_strict_mode_raises_on_forced_collision():
    # a tree that breaks the fast property: each fast child hears both fast parents
    g = from_edges(5, [(0, 1), (0, 2), (1, 3), (2, 4), (1, 4), (2, 3)])
    s = make_sgst(g, 0, [-1, 0, 0, 1, 2], 2)
    # seed 4 informs both parents before their shared fast slot comes round
    with pytest.raises(CollisionError):
        run_protocol(g, FaultlessBroadcast(s, strict=True), SimConfig(seed=4))
    noisy = [run_protocol(g, FaultlessBroadcast(s), SimConfig(seed=k)).stats["attributable_noise"]
             for k in range(10)]
    assert max(noisy) > 0


@pytest.mark.parametrize("spec", ["grid(6,6)", "rand(60,0.1)", "expander(12,8)"])
def test_slow_coloring_is_proper(spec):
    g = generate_graph(spec, 4)
    s = build_sgst(g, 0, 3)
    color, ncolors = slow_coloring(g, s)
    for v in range(g.n):
        kids = s.children_of_class(v, NodeClass.SLOW)
        assert (color[v] >= 0) == bool(kids)
        for c in kids:
            for w in g.adjacency[c]:
                if w != v and color[w] >= 0 and s.layer_of[w] == s.layer_of[v]:
                    assert color[w] != color[v]
    for layer, m in ncolors.items():
        assert m >= 1


def test_faultless_export_path8():
    g = path_graph(8)
    s = build_sgst(g, 0)
    d = json.loads(export_schedule("faultless", g, s))
    for v in range(7):
        assert d["slots"][str(v)] == [[9 * s.rmax2, v % 9, "fast"]]
    assert d["slots"]["7"] == []
    assert d["superslow"]["decay_phase_len"] == decay_phase_len(8)


def test_faultless_export_import_idempotent():
    g = generate_graph("grid(6,7)", 0)
    s = build_sgst(g, 0, 3)
    first = export_schedule("faultless", g, s)
    again = reexport_schedule(import_schedule(first))
    assert first == again
    # the imported table drives the same deterministic transmissions
    a = run_protocol(g, FaultlessBroadcast(s), SimConfig(seed=3), record="rounds")
    b = run_protocol(g, FaultlessBroadcast(s, schedule=import_schedule(first)), SimConfig(seed=3),
                     record="rounds")
    assert [o.transmitters.tolist() for o in a.outcomes] == [o.transmitters.tolist() for o in b.outcomes]


def test_import_rejects_garbage():
    with pytest.raises(ConfigError):
        import_schedule('{"scheme": "nope"}')
    with pytest.raises(ConfigError):
        import_schedule('{"scheme": "robust", "S": 2}')


# --- robust ---------------------------------------------------------------------------------


def test_phase_layout():
    assert [phase_kind(t) for t in (0, 1, 2)] == ["fast"] * 3
    assert phase_kind(4) == "slow" and phase_kind(7) == "superslow"
    assert phase_kind(9) == "fast" and phase_kind(14) == "slow"


def test_split_stretch_examples():
    assert split_stretch(list(range(0, 7)), 3) == [3, 3, 1]
    assert split_stretch([0, 1, 2], 3) == [3]
    assert split_stretch(list(range(5)), 1) == [1] * 5
    # a stretch that starts between barriers gets a shorter first block
    assert split_stretch(list(range(1, 8)), 3) == [2, 3, 2]


def test_default_block_size():
    assert default_block_size(2) == 1
    assert default_block_size(16) == 2
    assert default_block_size(256) == 3
    assert default_block_size(1 << 16) == 4


@pytest.mark.parametrize("spec", CORPUS)
@pytest.mark.parametrize("S", [1, 2, 3])
def test_supernodes_tile_stretches(spec, S):
    g = generate_graph(spec, 2)
    s = build_sgst(g, 0)
    sn = contract_supernodes(s, S)
    fast_nodes = {v for v in range(g.n) if s.fast_child[v] >= 0 or s.class_of[v] is NodeClass.FAST}
    covered = [v for b in sn.blocks for v in b]
    assert sorted(covered) == sorted(fast_nodes)
    assert all(1 <= len(b) <= S for b in sn.blocks)
    for i, b in enumerate(sn.blocks):
        layers = [s.layer_of[v] for v in b]
        assert layers == list(range(layers[0], layers[0] + len(b)))
        assert all(l // S == sn.level[i] for l in layers)
        assert all(s.ranked.rank2[v] == sn.rank[i] for v in b)
    joined = []
    for chain in sn.stretches:
        blocks = [sn.blocks[j] for j in dict.fromkeys(sn.block_of[list(chain)].tolist())]
        joined.append(tuple(v for b in blocks for v in b) == chain)
    assert all(joined)
    if S == 1:
        assert all(len(b) == 1 for b in sn.blocks)


def test_supernodes_rejects_bad_S():
    with pytest.raises(ConfigError):
        contract_supernodes(build_sgst(path_graph(4), 0), 0)


def test_robust_p0_path():
    g = path_graph(40)
    s = build_sgst(g, 0)
    tr = run_protocol(g, RobustBroadcast(s), SimConfig(seed=1))
    assert tr.success and tr.stats["fast_tx"] > 0


@pytest.mark.parametrize("spec", ["grid(6,6)", "expander(16,8)", "cbt(63)", "rand(64,0.1)"])
def test_robust_fast_rounds_collision_free(spec):
    g = generate_graph(spec, 3)
    s = build_sgst(g, 0)
    proto = RobustBroadcast(s, c_mult=2, rank_spacing=1)
    tr = run_protocol(g, proto, SimConfig(seed=1), record="rounds")
    assert tr.success
    fc = np.asarray(s.fast_child)
    for out in tr.outcomes:
        if phase_kind(out.round) == "fast" and out.transmitters.size:
            kids = fc[out.transmitters]
            assert (kids >= 0).all()
            assert not (out.status[kids] == Reception.NOISE).any()


@pytest.mark.parametrize("spec", ["grid(5,5)", "expander(12,4)", "path(20)"])
def test_robust_within_constant_factor_of_faultless(spec):
    g = generate_graph(spec, 0)
    s = build_sgst(g, 0)
    for trial in range(3):
        cfg = SimConfig(seed=6, trial_id=trial)
        r = run_protocol(g, RobustBroadcast(s), cfg)
        f = run_protocol(g, FaultlessBroadcast(s), cfg)
        assert r.success and f.success
        assert r.completion_round <= 40 * max(f.completion_round, 9)


def test_robust_block_stats_and_export():
    g = generate_graph("expander(24,4)", 1)
    s = build_sgst(g, 0)
    proto = RobustBroadcast(s, track_blocks=True)
    tr = run_protocol(g, proto, SimConfig(p=0.05, seed=2))
    assert "block_exit_fail_rate" in tr.stats and "connector_delay_mean" in tr.stats
    for _, rounds, ok in proto.block_transits():
        assert rounds >= -1 and isinstance(ok, bool)
    d = json.loads(export_schedule("robust", g, s))
    assert {"S", "c_mult", "x", "phase_layout"} <= set(d)
    text = export_schedule("robust", g, s)
    assert reexport_schedule(import_schedule(text)) == text


def test_robust_bad_spacing():
    with pytest.raises(ConfigError):
        RobustBroadcast(build_sgst(path_graph(3), 0), rank_spacing=0)


def test_protocols_monotone_informed():
    g = generate_graph("grid(5,5)", 0)
    s = build_sgst(g, 0)
    for proto in (DecayBroadcast(0), FaultlessBroadcast(s), RobustBroadcast(s)):
        tr = run_protocol(g, proto, SimConfig(p=0.1, seed=3), record="events")
        seen = set()
        for rnd, node, ev, _ in tr.events:
            if ev == "INFORMED":
                assert node not in seen
                seen.add(node)
        # every informed node (bar the source) logged a message reception that round
        rx = {(r, v) for r, v, e, _ in tr.events if e == "RX_MSG"}
        assert all((tr.informed_round[v], v) in rx for v in range(g.n) if v != 0)


# --- multi-message --------------------------------------------------------------------------


def test_multi_k1_equals_robust():
    g = generate_graph("expander(12,4)", 0)
    s = build_sgst(g, 0)
    for trial in range(3):
        cfg = SimConfig(p=0.1, seed=4, trial_id=trial)
        a = run_protocol(g, RobustBroadcast(s), cfg, record="rounds")
        b = run_protocol(g, MultiMessageBroadcast(RobustBroadcast(s), 1), cfg, record="rounds")
        assert a.completion_round == b.completion_round
        assert np.array_equal(a.informed_round, b.informed_round)
        for x, y in zip(a.outcomes, b.outcomes):
            assert np.array_equal(x.transmitters, y.transmitters)
            assert np.array_equal(x.status, y.status)


def test_multi_two_node_k2():
    g = path_graph(2)
    s = build_sgst(g, 0)
    proto = MultiMessageBroadcast(RobustBroadcast(s), 2)
    tr = run_protocol(g, proto, SimConfig(), record="rounds")
    assert tr.success
    receptions = sum(int(o.status[1] == Reception.MESSAGE) for o in tr.outcomes)
    assert receptions == 2 + proto.redundant
    assert np.array_equal(proto.decoded(1), proto.messages)


@pytest.mark.parametrize("k", [1, 3, 6])
def test_multi_decodes_everywhere(k):
    g = generate_graph("grid(4,5)", 0)
    s = build_sgst(g, 0)
    proto = MultiMessageBroadcast(RobustBroadcast(s), k)
    tr = run_protocol(g, proto, SimConfig(p=0.1, seed=8))
    assert tr.success and (proto.rank == k).all()
    for v in range(g.n):
        assert np.array_equal(proto.decoded(v), proto.messages)
    assert tr.stats["k"] == k


def test_multi_budget_includes_k():
    g = path_graph(10)
    assert default_max_rounds(g, 8) > default_max_rounds(g)


def test_multi_rejects_k0():
    with pytest.raises(ConfigError):
        MultiMessageBroadcast(RobustBroadcast(build_sgst(path_graph(3), 0)), 0)
