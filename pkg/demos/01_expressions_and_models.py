"""Parse symbolic model expressions, evaluate them, and differentiate them.

The model-definition grammar is plain infix arithmetic (+ - * / ^ with ^
right-associative); names bind to inputs or parameters at evaluation time.
"""

import numpy as np

from symdisc import eval_expr, grad_expr, parse_expr, print_expr

# Feynman I.24.6: E = c m^e1 (w^e2 + w0^e3) z^e4
source = "c*m^e1*(w^e2 + w0^e3)*z^e4"
tree = parse_expr(source)
print("canonical form:", print_expr(tree))

bindings = dict(m=1.0, w=1.0, w0=1.0, z=1.0, c=0.25, e1=1.0, e2=2.0, e3=2.0, e4=2.0)
print("value at the truth, x = (1,1,1,1):", eval_expr(tree, bindings))

# exact parameter gradient by forward-mode differentiation of the tree
params = ["c", "e1", "e2", "e3", "e4"]
print("d/d theta:", grad_expr(tree, bindings, params))

# evaluation is vectorized: bind arrays to sweep a coordinate
sweep = dict(bindings, z=np.linspace(0.5, 2.0, 4))
print("response along a z sweep:", np.round(eval_expr(tree, sweep), 4))

# powers follow IEEE conventions: domain errors flag as NaN, never raise
print("(-1)^0.5 ->", eval_expr(parse_expr("x^0.5"), {"x": -1.0}))
print("(-2)^3   ->", eval_expr(parse_expr("x^3"), {"x": -2.0}))
