import itertools
import random
from fractions import Fraction as F
from pathlib import Path

import numpy as np
import pytest

from pcinfer.dsl import load_theory
from pcinfer.engine import pci_predict
from pcinfer.oracle import (
    MAX_ATOMS,
    Constraint,
    InconsistentConstraints,
    JointTable,
    OracleError,
    ZeroProbabilityError,
    constraints_from_theory,
    exact_conditional,
    independence_holds,
    me_fit,
    read_joint_csv,
    rules_from_joint,
    theory_from_constraints,
    uniform,
    write_joint_csv,
)
from pcinfer.schema import AtomSet, FeatureDef, Schema

from theorygen import BOOL, TRUE, hub_theory

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


def bools(*names):
    return tuple(FeatureDef(n, BOOL) for n in names)


def sit(**kw):
    return Schema({k: AtomSet([v]) for k, v in kw.items()})


# -- joint tables -----------------------------------------------------------------


def test_joint_invariants():
    with pytest.raises(OracleError):
        JointTable(bools("A", "G"), "G", np.full((2, 2), 0.3))
    with pytest.raises(OracleError):
        JointTable(bools("A", "G"), "G", np.array([[0.5, 0.5], [0.5, -0.5]]))
    with pytest.raises(OracleError, match="cap"):
        uniform(bools(*(f"X{i}" for i in range(12)), "G"), "G")
    assert uniform(bools(*(f"X{i}" for i in range(11)), "G"), "G").probs.size == MAX_ATOMS


def test_uniform_conditional_is_half():
    joint = uniform(bools("A", "B", "C", "G"), "G", exact=True)
    for given in (Schema(), sit(A="true"), sit(A="false", C="true")):
        assert exact_conditional(joint, given) == {"true": F(1, 2), "false": F(1, 2)}


def test_definitional_conditional():
    # P(G, Y) = 0.1, P(Y) = 0.4
    probs = np.array([[F(1, 10), F(3, 10)], [F(3, 10), F(3, 10)]], dtype=object)
    joint = JointTable(bools("Y", "G"), "G", probs)
    assert exact_conditional(joint, sit(Y="true"))["true"] == F(1, 4)


def test_conditioning_on_impossible_event():
    probs = np.array([[0.0, 0.0], [0.5, 0.5]])
    joint = JointTable(bools("Y", "G"), "G", probs)
    with pytest.raises(ZeroProbabilityError):
        exact_conditional(joint, sit(Y="true"))


# -- independence -----------------------------------------------------------------


def test_product_joint_independent():
    pa, pb = np.array([0.3, 0.7]), np.array([0.6, 0.4])
    probs = np.einsum("i,j,k->ijk", pa, pb, [0.5, 0.5])
    joint = JointTable(bools("A", "B", "G"), "G", probs)
    assert independence_holds(joint, ["A"], ["B"], tol=1e-12)


def test_correlated_pair_dependent():
    probs = np.zeros((2, 2, 2))
    probs[0, 0, :] = 0.25
    probs[1, 1, :] = 0.25
    joint = JointTable(bools("A", "B", "G"), "G", probs)
    res = independence_holds(joint, ["A"], ["B"])
    assert not res and res.max_deviation == pytest.approx(0.25)


def test_zero_slices_are_skipped():
    probs = np.zeros((2, 2, 2))
    probs[:, :, 0] = 0.25
    joint = JointTable(bools("A", "B", "G"), "G", probs)
    res = independence_holds(joint, ["A"], ["B"], given=["G"])
    assert res.holds and res.skipped == [{"G": "false"}] and res.slices_checked == 1


def test_overlapping_sets_refused():
    with pytest.raises(OracleError):
        independence_holds(uniform(bools("A", "G"), "G"), ["A"], ["A"])


# -- maximum entropy -----------------------------------------------------------------


def test_no_constraints_gives_uniform():
    joint = me_fit(bools("A", "B", "G"), "G", [])
    assert np.allclose(joint.probs, 1 / 8)


def test_single_prior_constraint():
    joint = me_fit(bools("G"), "G", [Constraint(Schema(), "true", 0.2)])
    assert joint.probs == pytest.approx([0.2, 0.8], abs=1e-12)


def test_inconsistent_constraints():
    feats = bools("A", "G")
    with pytest.raises(InconsistentConstraints):
        me_fit(feats, "G", [
            Constraint(Schema(), "true", 1.0),
            Constraint(sit(A="true"), "true", 0.5),
        ])


def test_fig2_me_independences():
    t = load_theory((CORPUS / "fig2_swedish.theory").read_text()).as_float()
    joint = me_fit(t.space.features, t.target, constraints_from_theory(t))
    # tall and blue-eyed are conditionally independent given blond, and given blond & swedish
    assert independence_holds(joint, ["tall"], ["blue-eyed"], given=sit(blond="true"),
                              given_features=["swedish"], tol=1e-9)
    # ...but not marginally given blond alone: ME only factorises once swedish is fixed
    assert not independence_holds(joint, ["tall"], ["blue-eyed"], given=sit(blond="true"), tol=1e-9)


def test_me_fit_satisfies_constraints_and_beats_random_tables():
    rng = random.Random(5)
    theory, _ = hub_theory(rng)
    cons = constraints_from_theory(theory)
    joint = me_fit(theory.space.features, theory.target, cons)
    for c in cons:
        assert float(exact_conditional(joint, c.context)[c.value]) == pytest.approx(c.probability, abs=1e-9)
    # feasible tables reached from random starts by slice-preserving rescaling
    nprng = np.random.default_rng(0)
    h = joint.entropy()
    for _ in range(8):
        start = joint.probs * nprng.uniform(0.2, 1.8, size=joint.probs.shape)
        feasible = _project(start / start.sum(), theory, cons)
        assert feasible.entropy() <= h + 1e-9


def _project(probs, theory, cons, tol=1e-11):
    """A feasible table (generally not of maximal entropy)."""
    table = JointTable(theory.space.features, theory.target, probs)
    slices = []
    for c in cons:
        ctx = table.mask(c.context)
        hit = ctx & table.mask({theory.target: [c.value]})
        slices.append((hit, ctx & ~hit, c.probability))
    for _ in range(10_000):
        worst = 0.0
        for hit, miss, p in slices:
            a, b = table.probs[hit].sum(), table.probs[miss].sum()
            worst = max(worst, abs(a / (a + b) - p))
            table.probs[hit] *= p * (a + b) / a
            table.probs[miss] *= (1 - p) * (a + b) / b
        if worst < tol:
            return table
    raise AssertionError("feasible projection did not converge")


def test_fig6_me_regression_baseline():
    """ME and PCI differ on the worked example; the ME value is frozen here.

    The theory has no rule on C, so PCI divides by the prior 1/5 where the
    ME joint implies P(G|C) = 0.267321...; substituting that value into the
    product formula reproduces the ME answer.
    """
    t = load_theory((CORPUS / "fig6.theory").read_text()).as_float()
    joint = me_fit(t.space.features, t.target, constraints_from_theory(t))
    abcd = sit(A="true", B="true", C="true", D="true")
    me = exact_conditional(joint, abcd)["true"]
    assert me == pytest.approx(0.7254958333, abs=1e-8)
    pgc = exact_conditional(joint, sit(C="true"))
    assert pgc["true"] == pytest.approx(0.2673211886, abs=1e-8)
    raw = {v: t.rule("Rab").prob(v) * t.rule("Rac").prob(v) * t.rule("Rcd").prob(v)
           / (t.rule("Ra").prob(v) * pgc[v]) for v in ("true", "false")}
    assert raw["true"] / sum(raw.values()) == pytest.approx(me, abs=1e-9)
    assert pci_predict(t, abcd).prob("true") == pytest.approx(27 / 34)


# -- rules from joints ----------------------------------------------------------------


def test_rules_from_uniform_joint():
    joint = uniform(bools("A", "B", "G"), "G")
    for c in rules_from_joint(joint, [Schema(), sit(A="true", B="false")]):
        assert c.probability == pytest.approx(0.5)


def test_rules_from_deterministic_joint():
    probs = np.zeros((2, 2))
    probs[0, 0] = probs[1, 1] = 0.5  # G = A
    joint = JointTable(bools("A", "G"), "G", probs)
    got = {c.value: c.probability for c in rules_from_joint(joint, [sit(A="true")])}
    assert got == {"true": 1.0, "false": 0.0}


def test_rules_from_zero_probability_context():
    probs = np.zeros((2, 2))
    probs[1, :] = 0.5
    with pytest.raises(ZeroProbabilityError):
        rules_from_joint(JointTable(bools("A", "G"), "G", probs), [sit(A="true")])


def test_round_trip_me_fit_then_extract():
    rng = random.Random(8)
    for _ in range(5):
        theory, _ = hub_theory(rng)
        cons = constraints_from_theory(theory)
        joint = me_fit(theory.space.features, theory.target, cons)
        contexts = [r.context for r in theory.rules]
        for orig, back in zip(cons, rules_from_joint(joint, contexts)):
            assert (orig.context, orig.value) == (back.context, back.value)
            assert back.probability == pytest.approx(orig.probability, abs=1e-9)


def test_theory_from_random_decomposable_joint():
    nprng = np.random.default_rng(2)
    feats = bools("tall", "blond", "blue", "G")
    # P(blond) P(G|blond) P(tall|G,blond) P(blue|G,blond): tall, blue independent given G & blond
    p_b = nprng.uniform(0.2, 0.8)
    p_g = nprng.uniform(0.2, 0.8, size=2)
    p_t = nprng.uniform(0.2, 0.8, size=(2, 2))
    p_e = nprng.uniform(0.2, 0.8, size=(2, 2))
    probs = np.zeros((2, 2, 2, 2))
    for t, b, e, g in itertools.product(range(2), repeat=4):
        pb = p_b if b == 0 else 1 - p_b
        pg = p_g[b] if g == 0 else 1 - p_g[b]
        pt = p_t[b, g] if t == 0 else 1 - p_t[b, g]
        pe = p_e[b, g] if e == 0 else 1 - p_e[b, g]
        probs[t, b, e, g] = pb * pg * pt * pe
    joint = JointTable(feats, "G", probs)
    contexts = [Schema(), sit(blond="true"), sit(tall="true", blond="true"), sit(blond="true", blue="true")]
    theory = theory_from_constraints(joint.space(), "G", rules_from_joint(joint, contexts))
    assert [r.context for r in theory.rules] == contexts
    pred = pci_predict(theory, sit(tall="true", blond="true", blue="true"))
    exact = exact_conditional(joint, sit(tall="true", blond="true", blue="true"))
    assert float(pred.prob("true")) == pytest.approx(float(exact["true"]), abs=1e-12)


# -- CSV fixtures ----------------------------------------------------------------------


def test_csv_round_trip_exact():
    text = "A,G,probability\ntrue,true,1/10\ntrue,false,3/10\nfalse,true,0.3\nfalse,false,3/10\n"
    joint = read_joint_csv(text, exact=True)
    assert joint.exact and joint.names == ["A", "G"] and joint.target == "G"
    again = read_joint_csv(write_joint_csv(joint), exact=True)
    assert (again.probs == joint.probs).all()


def test_csv_missing_rows_are_zero_and_domains_follow_declarations():
    text = "A,G,probability\ntrue,true,1/2\nfalse,false,1/2\n"
    joint = read_joint_csv(text, features=bools("A", "G"))
    assert joint.probs[0, 1] == 0 and joint.domain("A") == ["true", "false"]


@pytest.mark.parametrize("text", [
    "",
    "A,G,p\ntrue,true,1\n",
    "A,G,probability\ntrue,true\n",
    "A,G,probability\ntrue,true,abc\n",
    "A,G,probability\ntrue,true,1/2\ntrue,false,1/4\n",
])
def test_csv_errors(text):
    with pytest.raises(OracleError):
        read_joint_csv(text)


def test_csv_undeclared_value():
    with pytest.raises(OracleError):
        read_joint_csv("A,G,probability\nmaybe,true,1\n", features=bools("A", "G"))


def test_hub_theory_generator_sanity():
    theory, closed = hub_theory(random.Random(1))
    assert closed[0] == Schema({"X0": TRUE})
