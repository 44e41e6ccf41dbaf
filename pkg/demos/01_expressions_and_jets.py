"""Parsing coordinate expressions and evaluating them as jets.

A jet carries the value and every mixed partial derivative up to order 4,
computed by truncated Taylor arithmetic rather than finite differencing.
"""

import numpy as np

from weyl4.exprjet import eval_jet, eval_values, expr_to_string, parse_expression

coords = ("x", "y", "z", "t")

expr = parse_expression("exp(x*y) / (1 + z^2)", coords)
print("parsed:", expr_to_string(expr))

point = [0.3, 0.7, 0.2, 0.0]
jet = eval_jet(expr, point, order=3)
print(f"value at {point}: {jet.value:.12f}")
print("gradient:", jet.gradient())
print("d^2/dxdy:", jet.partial((1, 1, 0, 0)))
print("d^3/dx^2 dy:", jet.partial((2, 1, 0, 0)))

# compare one derivative against a central difference
h = 1e-5
f = lambda p: eval_values(expr, list(p))
pp, pm = list(point), list(point)
pp[0] += h
pm[0] -= h
fd = (f(pp) - f(pm)) / (2 * h)
print(f"d/dx: jet {jet.partial((1,0,0,0)):.12f}  vs central difference {fd:.12f}")

# jets are exact: the quartic is reproduced with no truncation error
quartic = parse_expression("x^4 + 2*x^2*y^2 + t*z^3", coords)
j4 = eval_jet(quartic, [1.0, -1.0, 2.0, 0.5], order=4)
print("d^4/dx^4 of the quartic:", j4.partial((4, 0, 0, 0)), "(exact: 24)")
print("d^4/dx^2 dy^2:", j4.partial((2, 2, 0, 0)), "(exact: 8)")
