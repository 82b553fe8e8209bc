"""Vector calculus on 3-tuples of polynomials, via total derivatives."""

from __future__ import annotations

from .symbolic import SPACE, T, FieldComp, Poly, ZERO, canonicalize, total_derivative

Vec = tuple  # three Poly components


def field_vec(name: str) -> Vec:
    return tuple(Poly.atom(FieldComp(name, k)) for k in (1, 2, 3))


def grad(s) -> Vec:
    return tuple(total_derivative(s, x) for x in SPACE)


def div(v: Vec) -> Poly:
    return sum((total_derivative(v[i], SPACE[i]) for i in range(3)), ZERO)


def curl(v: Vec) -> Vec:
    d = lambda i, j: total_derivative(v[i], SPACE[j])  # noqa: E731  d v_i / d x_j
    return (d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1))


def dot(u: Vec, v: Vec) -> Poly:
    return sum((canonicalize(a) * canonicalize(b) for a, b in zip(u, v)), ZERO)


def cross(u: Vec, v: Vec) -> Vec:
    u = tuple(map(canonicalize, u))
    v = tuple(map(canonicalize, v))
    return (u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0])


def laplacian(s) -> Poly:
    return sum((total_derivative(total_derivative(s, x), x) for x in SPACE), ZERO)


def dt(v):
    if isinstance(v, tuple):
        return tuple(total_derivative(c, T) for c in v)
    return total_derivative(v, T)


def scale(k, v: Vec) -> Vec:
    return tuple(canonicalize(k) * canonicalize(c) for c in v)


def add(u: Vec, v: Vec) -> Vec:
    return tuple(canonicalize(a) + canonicalize(b) for a, b in zip(u, v))


def sub(u: Vec, v: Vec) -> Vec:
    return tuple(canonicalize(a) - canonicalize(b) for a, b in zip(u, v))
