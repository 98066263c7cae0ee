"""Writes the validity fixture cases.

Each case lists three control and three test reports plus the verdict worked
out by hand. Run from this directory; output is committed alongside.
"""
import json
import os
import shutil


def names(prefix, lo, hi):
    return [f"{prefix}{i:03d}" for i in range(lo, hi + 1)]


SIG = names("sig", 1, 20)
API = names("api", 1, 20)
PROC = names("proc", 1, 4)


def rep(sig=(), api=(), proc=(), failed=False):
    return {"signatures": list(sig), "api_calls": list(api), "processes": list(proc), "failed": failed}


FAILED = rep(failed=True)
BASE = rep(SIG, API, PROC)


def other(tag):
    """A report sharing nothing with BASE."""
    return rep(names("x" + tag + "s", 1, 20), names("x" + tag + "a", 1, 20), names("x" + tag + "p", 1, 4))


def disjoint_except(**keep):
    r = other("d")
    for k, v in keep.items():
        r[k] = list(v)
    return r


CASES = {}


def case(name, controls, tests, decision, matched):
    CASES[name] = (controls, tests, {"decision": decision, "matched_features": matched})


three = lambda r: [r, r, r]

case("c01_identical", three(BASE), three(BASE), "success", 9)
case("c02_first_test_failed", three(BASE), [FAILED, BASE, BASE], "failure", 0)
# T1 and T2 contribute 3 each before T3 stops the evaluation.
case("c03_last_test_failed", three(BASE), [BASE, BASE, FAILED], "failure", 6)
case("c04_one_signature_missing", three(BASE), three(rep(SIG[1:], API, PROC)), "success", 9)
case("c05_two_signatures_missing", three(BASE), three(rep(SIG[2:], API, PROC)), "success", 6)
case("c06_nothing_shared", three(BASE), three(other("a")), "failure", 0)
case("c07_single_match", three(BASE), [disjoint_except(processes=PROC), other("b"), other("c")], "failure", 1)
case("c08_two_matches_across_reports", three(BASE),
     [disjoint_except(processes=PROC), disjoint_except(processes=PROC), other("c")], "success", 2)
case("c09_two_matches_one_report", three(BASE),
     [disjoint_except(signatures=SIG, api_calls=API), other("b"), other("c")], "success", 2)

S2, S3 = names("sig", 21, 40), names("sig", 41, 60)
case("c10_matches_third_control", [BASE, rep(S2, API, PROC), rep(S3, API, PROC)],
     three(disjoint_except(signatures=S3)), "success", 3)
# 20 shared of 21 -> 0.952
case("c11_one_extra_signature", three(BASE), three(disjoint_except(signatures=SIG + ["sig999"])), "success", 3)
# 20 shared of 22 -> 0.909
case("c12_two_extra_signatures", three(BASE),
     three(disjoint_except(signatures=SIG + ["sig998", "sig999"])), "failure", 0)
case("c13_all_empty", three(rep()), three(rep()), "success", 9)
case("c14_empty_control_signatures", three(rep((), API, PROC)), three(disjoint_except(signatures=SIG)), "failure", 0)

S40 = names("sig", 1, 40)
# 38 of 40 -> exactly 0.95
case("c15_boundary_forty", three(rep(S40, API, PROC)), three(disjoint_except(signatures=S40[2:])), "success", 3)
# 37 of 40 -> 0.925
case("c16_below_boundary_forty", three(rep(S40, API, PROC)), three(disjoint_except(signatures=S40[3:])),
     "failure", 0)

S100 = names("sig", 1, 100)
T100 = S100[5:] + names("new", 1, 5)
# 95 shared, both sizes 100 -> 0.95
case("c17_boundary_hundred", three(rep(S100, API, PROC)), three(disjoint_except(signatures=T100)), "success", 3)
T94 = S100[6:] + names("new", 1, 6)
case("c18_below_boundary_hundred", three(rep(S100, API, PROC)), three(disjoint_except(signatures=T94)), "failure", 0)

A, B = names("sig", 1, 20), names("sig", 101, 120)
case("c19_each_test_own_control", [rep(A, API, PROC), rep(B, API, PROC), other("q")],
     [disjoint_except(signatures=A[1:]), disjoint_except(signatures=B[1:]), other("c")], "success", 2)
case("c20_one_api_match", three(BASE), [other("a"), disjoint_except(api_calls=API), other("c")], "failure", 1)
case("c21_all_tests_failed", three(BASE), three(FAILED), "failure", 0)
case("c22_one_control_failed", [FAILED, BASE, BASE], three(BASE), "success", 9)
case("c23_all_controls_failed", three(FAILED), three(BASE), "failure", 0)
# Failed controls carry empty sets; empty-but-running tests agree with them fully.
case("c24_failed_controls_empty_tests", three(FAILED), three(rep()), "success", 9)
case("c25_single_process_changed", three(BASE), three(rep(SIG, API, ["proc999"])), "success", 6)
# T1 api 19/20 matches, T2 api 18/20 does not, T3 api disjoint; signatures match everywhere.
case("c26_api_drift", three(BASE),
     [rep(SIG, API[1:], ["z1"]), rep(SIG, API[2:], ["z2"]), rep(SIG, names("w", 1, 20), ["z3"])], "success", 4)
# Best agreement with C1 and C3 is 0.9; only C2 reaches 0.95.
case("c27_single_match_second_control", [rep(SIG[2:] + ["c1a", "c1b"], (), ()), rep(SIG, (), ()),
                                          rep(SIG[2:] + ["c3a", "c3b"], (), ())],
     [rep(SIG[1:], ["t"], ["t"]), other("b"), other("c")], "failure", 1)
# processes lose one of four -> 0.75
case("c28_processes_below", three(BASE), three(rep(SIG[1:], API[1:], PROC[1:])), "success", 6)
case("c29_order_irrelevant", three(BASE), three(rep(SIG[::-1], API[::-1], PROC[::-1])), "success", 9)
case("c30_middle_test_failed", three(BASE), [BASE, FAILED, BASE], "failure", 3)


def main():
    here = os.path.dirname(os.path.abspath(__file__))
    for name, (controls, tests, expected) in CASES.items():
        d = os.path.join(here, name)
        shutil.rmtree(d, ignore_errors=True)
        os.makedirs(d)
        for role, reports in (("control", controls), ("test", tests)):
            for i, r in enumerate(reports, 1):
                with open(os.path.join(d, f"{role}_{i}.json"), "w") as f:
                    json.dump(r, f, indent=1)
        with open(os.path.join(d, "expected.json"), "w") as f:
            json.dump(expected, f)
    print(len(CASES), "cases")


if __name__ == "__main__":
    main()
