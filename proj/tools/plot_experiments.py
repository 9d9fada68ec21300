#!/usr/bin/env python3
"""Plots the CSVs written by `seqlabel simulate --experiment scaling|sequential`."""

import argparse
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_scaling(path, out):
    errors = defaultdict(lambda: defaultdict(list))
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            errors[row["tying"]][int(row["n"])].append(float(row["error"]))
    fig, ax = plt.subplots(figsize=(5, 4))
    for tying, by_n in sorted(errors.items()):
        ns = sorted(by_n)
        means = [sum(by_n[n]) / len(by_n[n]) for n in ns]
        ax.loglog(ns, means, marker="o", label=tying)
    ax.set_xlabel("n")
    ax.set_ylabel("mean ||mu_hat - mu*||_2")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out)


def plot_benefit(path, out):
    f1 = defaultdict(list)
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            f1[row["method"]].append(float(row["f1"]))
    methods = ["modeled", "ignored", "majority"]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.boxplot([f1[m] for m in methods])
    ax.set_xticks(range(1, len(methods) + 1), methods)
    ax.set_ylabel("element F1")
    fig.tight_layout()
    fig.savefig(out)


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("kind", choices=["scaling", "sequential"])
    p.add_argument("csv")
    p.add_argument("out", help="image path, e.g. scaling.png")
    a = p.parse_args()
    (plot_scaling if a.kind == "scaling" else plot_benefit)(a.csv, a.out)


if __name__ == "__main__":
    main()
