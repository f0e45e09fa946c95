#!/usr/bin/env python3
"""Certify or refute the structural hypotheses across the model zoo.

For each model potential and a few energies: shell microhyperbolicity (with
per-point direction search) and the dilation escape bound.
"""
import json

import ssf_lab as sl
from ssf_lab.symbols import schrodinger_symbol

MODELS = {
    "free": sl.model_potential("constant", v_inf=0.0, N=1),
    "gauss_well": sl.model_potential("diagonal_bumps", depths=[-1.0], centers=[0.0],
                                     widths=[1.0]),
    "conical_crossing": sl.model_potential("conical_crossing"),
    "avoided_crossing": sl.model_potential("avoided_crossing", gap=0.2),
    "reference": sl.reference_potential(),
}

BOX = ((-3.0, 3.0), (-2.5, 2.5))


def main():
    for name, v in MODELS.items():
        print(f"== {name} ==")
        p = schrodinger_symbol(v)
        for tau0 in (0.0, 0.5, 1.0, 2.0):
            cert = sl.check_on_energy_shell(p, tau0, BOX, grid_points=41)
            if cert.empty_shell:
                status = "empty shell"
            elif cert.valid:
                status = f"microhyperbolic, C0={cert.C0:.3g}"
            else:
                worst = cert.failures[0] if cert.failures else None
                status = f"REFUTED at {worst}"
            esc = sl.escape_check_dilation(v, tau0)
            esc_status = f"escape C={esc.C:.3g}" if esc.valid else "escape FAILS"
            print(f"  tau0={tau0:4.1f}: {status}; {esc_status}")
        print(f"  certificate (tau0=1.0): "
              f"{json.dumps(sl.check_on_energy_shell(p, 1.0, BOX, grid_points=31).to_json_dict())[:120]}...")


if __name__ == "__main__":
    main()
