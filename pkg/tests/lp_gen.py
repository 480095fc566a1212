"""Random small constraint systems shared by the simplex tests and the acceptance suite."""
import random


def difference_system(rng: random.Random, max_vars: int = 6, max_rows: int = 10):
    """Rows x_i - x_j (op) c or x_i (op) c with integer c in [-8, 8].

    The constraint matrix is a network matrix, so every vertex is integral. With at most
    six variables every vertex coordinate is at most 8 + 5 * 8 = 48, inside the lattice
    bound 50.
    """
    n = rng.randint(1, max_vars)
    names = [f"x{i}" for i in range(n)]
    rows = []
    for _ in range(rng.randint(1, max_rows)):
        if n > 1 and rng.random() < 0.7:
            i, j = rng.sample(range(n), 2)
            coeffs = {names[i]: 1, names[j]: -1}
        else:
            coeffs = {names[rng.randrange(n)]: 1}
        rows.append((coeffs, rng.choice([">=", ">=", "=", "<="]), rng.randint(-8, 8)))
    objective = {v: rng.randint(0, 4) for v in names}
    return objective, rows, names


def general_system(rng: random.Random, max_vars: int = 4, max_rows: int = 5):
    """Rows with coefficients in [-3, 3]; every variable is boxed by x <= 12, so the
    polytope is bounded and vertex enumeration is complete."""
    n = rng.randint(1, max_vars)
    names = [f"x{i}" for i in range(n)]
    rows = []
    for _ in range(rng.randint(1, max_rows)):
        coeffs = {v: rng.randint(-3, 3) for v in names}
        coeffs = {v: c for v, c in coeffs.items() if c} or {names[0]: 1}
        rows.append((coeffs, rng.choice([">=", "<=", "="]), rng.randint(-6, 10)))
    rows += [({v: 1}, "<=", 12) for v in names]
    objective = {v: rng.randint(-2, 4) for v in names}
    return objective, rows, names
