"""Derive the electromagnetic field equations from the potential-form Lagrangian."""

from varfield.electrodynamics import build_em_system, phi_intermediates, verify_em
from varfield.euler_lagrange import derive_all
from varfield.symbolic import render


def main() -> None:
    em = build_em_system()
    L = em.lagrangian
    for eq in derive_all(L):
        name = eq.field if eq.field in L.scalars else f"{eq.field}[{eq.comp}]"
        print(f"{name}: {render(eq.lhs, L.scalars)} = 0")
    print()
    for key, value in phi_intermediates(L).items():
        parts = value if isinstance(value, tuple) else (value,)
        print(f"{key} = {', '.join(render(p, L.scalars) for p in parts)}")
    print()
    print(verify_em(em).to_text())


if __name__ == "__main__":
    main()
