use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;

const SCRIPT: &str = r#"#!/usr/bin/env python3
"""Plots every trace CSV in this directory (gap and distance against
iterations) and, if present, the sweep summary on log-log axes."""
import csv
import glob
import os
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

HERE = os.path.dirname(os.path.abspath(__file__))


def read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def column(rows, key):
    pts = [(int(r["k"]), float(r[key])) for r in rows if r.get(key) not in (None, "", "NA")]
    return [p[0] for p in pts], [max(p[1], 1e-300) for p in pts]


def traces():
    found = False
    for key, label in (("gap", "primal-dual gap"), ("dist_sq", "squared distance to saddle")):
        fig, ax = plt.subplots()
        for path in sorted(glob.glob(os.path.join(HERE, "*.csv"))):
            rows = read(path)
            if not rows or "k" not in rows[0]:
                continue
            ks, vs = column(rows, key)
            if ks:
                found = True
                ax.semilogy(ks, vs, label=os.path.splitext(os.path.basename(path))[0])
        ax.set_xlabel("iteration")
        ax.set_ylabel(label)
        ax.legend()
        fig.savefig(os.path.join(HERE, key + ".png"), dpi=150)
        plt.close(fig)
    return found


def sweep():
    path = os.path.join(HERE, "summary.csv")
    if not os.path.exists(path):
        return False
    by_alg = {}
    for r in read(path):
        if r["rate_constant"] != "NA":
            by_alg.setdefault(r["algorithm"], []).append((float(r["kappa_x"]), float(r["rate_constant"])))
    fig, ax = plt.subplots()
    for alg, pts in sorted(by_alg.items()):
        pts.sort()
        ax.loglog([p[0] for p in pts], [p[1] for p in pts], "o-", label=alg)
    ax.set_xlabel("kappa_x")
    ax.set_ylabel("rate constant")
    ax.legend()
    fig.savefig(os.path.join(HERE, "sweep.png"), dpi=150)
    plt.close(fig)
    return True


if __name__ == "__main__":
    if not (sweep() | traces()):
        sys.exit("no CSV data found next to this script")
"#;

/// Writes `plot.py` into `dir`; it reads the CSVs beside it.
pub fn emit_plot_script(dir: &Path) -> anyhow::Result<PathBuf> {
    let path = dir.join("plot.py");
    fs::write(&path, SCRIPT).with_context(|| format!("writing {}", path.display()))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        fs::set_permissions(&path, fs::Permissions::from_mode(0o755))?;
    }
    Ok(path)
}
