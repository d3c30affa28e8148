#!/usr/bin/env python3
"""Export a MATPOWER-format case file and its AC-OPF baseline.

Uses PYPOWER (a Python port of MATPOWER 4) so the fixtures can be regenerated
without MATLAB. Generator reactive limits are lifted before solving the AC-OPF,
matching the active-power-only comparison the benchmark performs.

    pip install pypower
    python3 tools/export_baseline.py case14 data/
"""
import json
import sys
from pathlib import Path

import numpy as np
from pypower import api
from pypower.api import ppoption, runopf


def fmt(v):
    v = float(v)
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def matrix(name, rows, ncols):
    lines = [f"mpc.{name} = ["]
    for row in rows:
        lines.append("\t" + "\t".join(fmt(x) for x in row[:ncols]) + ";")
    lines.append("];")
    return "\n".join(lines)


def write_case(name, ppc, out):
    gencost = ppc["gencost"]
    ncost = gencost.shape[1]
    text = [
        f"function mpc = {name}",
        f"%{name.upper()}  Power flow data, exported from PYPOWER {name}.",
        "%   Bus, generator, branch and cost data are the MATPOWER 4 snapshot",
        "%   shipped with PYPOWER 5.1; regenerate with tools/export_baseline.py.",
        "",
        "%% MATPOWER Case Format : Version 2",
        "mpc.version = '2';",
        "",
        "%%-----  Power Flow Data  -----%%",
        "%% system MVA base",
        f"mpc.baseMVA = {fmt(ppc['baseMVA'])};",
        "",
        "%% bus data",
        "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin",
        matrix("bus", ppc["bus"], 13),
        "",
        "%% generator data",
        "%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin",
        matrix("gen", ppc["gen"], 10),
        "",
        "%% branch data",
        "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus",
        matrix("branch", ppc["branch"], 13),
        "",
        "%%-----  OPF Data  -----%%",
        "%% generator cost data",
        "%\t2\tstartup\tshutdown\tn\tc(n-1)\t...\tc0",
        matrix("gencost", gencost, ncost),
        "",
    ]
    out.write_text("\n".join(text))


def dump(doc):
    parts = []
    for key, value in doc.items():
        if isinstance(value, list):
            rows = ",\n".join("    " + json.dumps(row) for row in value)
            parts.append(f'  "{key}": [\n{rows}\n  ]')
        else:
            parts.append(f"  {json.dumps(key)}: {json.dumps(value)}")
    return "{\n" + ",\n".join(parts) + "\n}\n"


def main():
    name, outdir = sys.argv[1], Path(sys.argv[2])
    ppc = getattr(api, name)()
    write_case(name, ppc, outdir / f"{name}.m")

    relaxed = getattr(api, name)()
    relaxed["gen"][:, 3] = 9999.0
    relaxed["gen"][:, 4] = -9999.0
    res = runopf(relaxed, ppoption(VERBOSE=0, OUT_ALL=0))
    if not res["success"]:
        sys.exit("AC-OPF did not converge")
    baseline = {
        "version": 1,
        "case": name,
        "source": "PYPOWER runopf (MIPS), generator Q limits lifted",
        "objective": float(res["f"]),
        "bus": [[int(b[0]), float(b[7]), float(b[8])] for b in res["bus"]],
        "gen": [[int(g[0]), float(g[1])] for g in res["gen"]],
        "branch": [[int(r[0]), int(r[1]), float(r[13])] for r in res["branch"]],
    }
    (outdir / f"{name}_baseline.json").write_text(dump(baseline))


if __name__ == "__main__":
    main()
