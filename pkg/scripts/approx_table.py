#!/usr/bin/env python3
"""Degree-4 approximation table for ln(1 + e^-x) on [-5, 5].

Prints the power-basis coefficients and sup-norm error of the plain Bernstein
approximation, its residual iterations (1, 4, 9), and the minimax polynomial.
"""

import argparse

from margsyn.polyapprox import (Interval, approx_report, bernstein, iterated_bernstein,
                                logistic_loss, remez_minimax)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--degree", type=int, default=4)
    ap.add_argument("--a", type=float, default=-5.0)
    ap.add_argument("--b", type=float, default=5.0)
    args = ap.parse_args()

    iv = Interval(args.a, args.b)
    rows = [("bernstein", bernstein(logistic_loss, args.degree, iv))]
    for k in (1, 4, 9):
        rows.append((f"iterated x{k}", iterated_bernstein(logistic_loss, args.degree, k, iv)))
    rows.append(("minimax", remez_minimax(logistic_loss, args.degree, iv)))

    print(f"{'method':<14s} {'max error':>10s}  coefficients (ascending powers)")
    for name, poly in rows:
        rep = approx_report(poly, logistic_loss)
        coeffs = ", ".join(f"{c:+.4f}" for c in poly.coeffs)
        print(f"{name:<14s} {rep.max_abs_error:>10.4f}  [{coeffs}]")


if __name__ == "__main__":
    main()
