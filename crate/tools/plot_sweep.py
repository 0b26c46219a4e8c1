#!/usr/bin/env python3
"""Candidates and timings against n from one or more `rnaphase bench` CSVs.

usage: plot_sweep.py out.png bench1.csv [bench2.csv ...]
"""
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

fig, (a, b) = plt.subplots(1, 2, figsize=(10, 4))
for path in sys.argv[2:]:
    g = pd.read_csv(path, comment="#").groupby("n").mean(numeric_only=True)
    slope = np.polyfit(np.log(g.index), np.log(g.candidates), 1)[0]
    a.loglog(g.index, g.candidates, "o-", label=f"{path} candidates (slope {slope:.2f})")
    a.loglog(g.index, g.intervals, "x:", label=f"{path} intervals")
    if g.t_full_ms.notna().all():
        b.plot(g.index, g.t_sparse_ms / g.t_full_ms, "o-", label=path)
a.set_xlabel("n")
a.legend(fontsize="small")
b.set_xlabel("n")
b.set_ylabel("sparse / full time")
b.legend(fontsize="small")
fig.tight_layout()
fig.savefig(sys.argv[1], dpi=150)
