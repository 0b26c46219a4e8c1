#!/usr/bin/env python3
"""r(n) = C[n]/S[n] diagnostics from one or more `rnaphase count` CSVs.

usage: plot_ratios.py out.png count1.csv [count2.csv ...]
"""
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

fig, axes = plt.subplots(1, 3, figsize=(12, 3.5))
for path in sys.argv[2:]:
    df = pd.read_csv(path, comment="#")
    df = df[df.r > 0]
    axes[0].plot(df.n, df.r, label=path)
    axes[1].plot(df.n, df.n * df.r)
    axes[2].plot(df.n, np.log(df.r) / df.n)
for ax, title in zip(axes, ["r(n)", "n r(n)", "log r(n) / n"]):
    ax.set_title(title)
    ax.set_xlabel("n")
axes[0].legend(fontsize="small")
fig.tight_layout()
fig.savefig(sys.argv[1], dpi=150)
