"""Transform the wave Lagrangian under the scaling map and compare actions and residuals."""

import json

from varfield.electrodynamics import data_text
from varfield.numeric import GridSpec
from varfield.parser import parse_expression, parse_lagrangian, parse_transform
from varfield.symbolic import render
from varfield.transform import el_equivalence_report, transform_lagrangian

# a travelling wave solves the equations but is a null solution of the action,
# so the action comparison uses a separate trial field
SOLUTION = "(3*x1 + 4*x2 - 5*t)^4"
TRIAL = "(x1 - 2*x2 + t)^3 + x3^4 - t^2*x1"


def main() -> None:
    L = parse_lagrangian(data_text("wave.lag"))
    T = parse_transform(data_text("scaling.map"))
    TL = transform_lagrangian(L, T)
    print("det J =", render(TL.jacobian.det))
    print("transformed density:", render(TL.base.density, TL.base.scalars))

    rep = el_equivalence_report(L, T, {"psi": (parse_expression(SOLUTION),)}, GridSpec(),
                                trial={"psi": (parse_expression(TRIAL),)}, levels=3)
    print(json.dumps(rep.to_json(), indent=2))


if __name__ == "__main__":
    main()
