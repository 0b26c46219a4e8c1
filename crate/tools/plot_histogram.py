#!/usr/bin/env python3
"""Block-count histogram from `rnaphase sample --hist`.

usage: plot_histogram.py hist.csv out.png
"""
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

df = pd.read_csv(sys.argv[1], comment="#")
fig, ax = plt.subplots(figsize=(6, 4))
ax.bar(df.k, df.empirical, width=0.8, alpha=0.5, label="sampled")
if df.exact.notna().any():
    ax.plot(df.k, df.exact, "k.-", lw=1, label="exact")
if df.limit_law.notna().any():
    ax.plot(df.k, df.limit_law, "r--", lw=1, label="limit law")
ax.set_xlabel("irreducible blocks k")
ax.set_ylabel("P(X = k)")
ax.legend()
fig.tight_layout()
fig.savefig(sys.argv[2], dpi=150)
