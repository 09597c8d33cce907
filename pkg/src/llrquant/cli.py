"""
Command-line front end.

    python -m llrquant design --m 4096 --channel awgn --cn 32.2 --w-range 2..6
    python -m llrquant design --m 4096 --channel rayleigh --cn 34 --alloc --W 12..50:2
    python -m llrquant compress-stats --W 72 --trials 1000000
    python -m llrquant simulate --W 42 --nbar 32 --seed 7
    python -m llrquant gap --quant --unopt --nbar 36 --channel awgn
    python -m llrquant memory --preset table6

Every command writes ``manifest.json`` next to its outputs. Exit codes: 0 ok,
2 configuration error, 3 infeasible design, 4 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .compressor import build_huffman, build_loss_table
from .design import (DEFAULT_OBJECTIVE, GRID_VERSION, OBJECTIVES, W_MAX, allocate_bits,
                     allocate_bits_exhaustive, allocation_value, bank_from_allocation,
                     build_design_table, unopt_bank, upper_convexity)
from .errors import ConfigError, LlrQuantError
from .llr_stats import AWGN, FORMAT_VERSION, RAYLEIGH, ChannelModel
from .memory import conv_memory, proposed_memory, table6, write_table_csv
from .sim import MIN_TRIALS, CompressedDesign, SimConfig, design_gap, run_sim, unquantized_gmi

log = logging.getLogger("llrquant")

WORKING_POINT = {AWGN: 32.2, RAYLEIGH: 34.0}


@dataclass
class RunConfig:
    command: str
    M: int = 4096
    channel: str = AWGN
    cn_db: float | None = None
    objective: str = DEFAULT_OBJECTIVE
    w_max: int = W_MAX
    W: list = field(default_factory=list)
    nbar: int | None = None
    trials: int = 100_000
    seed: int = 0
    out: str = "."
    cache: str | None = None
    extra: dict = field(default_factory=dict)

    def channel_model(self) -> ChannelModel:
        cn = self.cn_db if self.cn_db is not None else WORKING_POINT[self.channel]
        return ChannelModel(self.channel, cn)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()


def parse_range(text: str) -> list[int]:
    """``"a..b"`` or ``"a..b:step"`` (inclusive) or a comma list."""
    try:
        if ".." in text:
            span, _, step = text.partition(":")
            lo, hi = span.split("..")
            return list(range(int(lo), int(hi) + 1, int(step) if step else 1))
        return [int(x) for x in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad range {text!r}") from exc


def write_manifest(cfg: RunConfig, outputs: list[str], extra: dict | None = None):
    out = Path(cfg.out)
    manifest = {
        "package_version": __version__,
        "format_version": FORMAT_VERSION,
        "grid_version": GRID_VERSION,
        "config": asdict(cfg),
        "config_sha256": cfg.digest(),
        "outputs": outputs,
    }
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=str))


def _design_table(cfg: RunConfig):
    return build_design_table(cfg.M, cfg.channel_model(), cfg.w_max, cfg.objective, cfg.cache)


def _fmt(x):
    return "" if x is None or (isinstance(x, float) and not math.isfinite(x)) else f"{x:.4f}"


def cmd_design(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    table = _design_table(cfg)
    outputs = ["design_table.json"]
    (out / "design_table.json").write_text(json.dumps(table.to_dict()))
    w_range = cfg.extra.get("w_range") or list(range(2, min(6, table.w_max) + 1))
    pairs = list(range(1, table.nbits + 1, 2))
    with open(out / "q_table.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["w"] + [f"k{k},{k + 1}" for k in pairs])
        for w in w_range:
            wr.writerow([w] + [_fmt(table.q[k - 1, w]) for k in pairs])
    with open(out / "i_table.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["w"] + [f"k{k},{k + 1}" for k in pairs])
        for w in range(table.w_max + 1):
            wr.writerow([w] + [f"{table.value[k - 1, w]:.9f}" for k in pairs])
    outputs += ["q_table.csv", "i_table.csv"]
    report = {"upper_convex": upper_convexity(table.value).tolist()}
    if cfg.extra.get("alloc"):
        with open(out / "allocation.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["W"] + [f"w{k}" for k in range(1, table.nbits + 1)] + ["value"])
            for W in cfg.W:
                w = allocate_bits(table.value, W)
                wr.writerow([W] + w.tolist() + [f"{allocation_value(table.value, w):.9f}"])
                bank = bank_from_allocation(table, w)
                (out / f"bank_W{W}.json").write_text(json.dumps(bank.to_dict()))
                outputs.append(f"bank_W{W}.json")
        outputs.append("allocation.csv")
    if cfg.extra.get("verify_exhaustive"):
        rows = []
        budgets = cfg.W or list(range(0, table.nbits * table.w_max + 1))
        for W in budgets:
            g = allocation_value(table.value, allocate_bits(table.value, W))
            e = allocation_value(table.value, allocate_bits_exhaustive(table.value, W))
            rows.append((W, g, e))
        with open(out / "exhaustive.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["W", "greedy", "exhaustive", "equal"])
            for W, g, e in rows:
                wr.writerow([W, f"{g:.12f}", f"{e:.12f}", abs(g - e) <= 1e-9])
        report["greedy_equals_exhaustive"] = all(abs(g - e) <= 1e-9 for _, g, e in rows)
        outputs.append("exhaustive.csv")
        print(f"greedy == exhaustive for all W: {report['greedy_equals_exhaustive']}")
    print(f"upper convex per k: {report['upper_convex']}")
    write_manifest(cfg, outputs, {"report": report})
    return 0


def _bank(cfg: RunConfig, W: int):
    table = _design_table(cfg)
    return bank_from_allocation(table, allocate_bits(table.value, W))


def cmd_compress_stats(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    W = cfg.W[0] if cfg.W else 36
    bank = _bank(cfg, W)
    codebook = build_huffman(bank.pmfs)
    losses = build_loss_table(bank.pmfs, codebook)
    rep = run_sim(SimConfig(bank, cfg.channel_model(), cfg.trials, cfg.seed, cfg.nbar, codebook, losses))
    rep.write_ccdf_csv(out / "ccdf.csv")
    (out / "codebook.json").write_text(codebook.to_json())
    (out / "loss_tables.json").write_text(json.dumps(
        {"version": FORMAT_VERSION, "delta": [d.tolist() for d in losses.delta]}))
    with open(out / "substitutions.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["substitutions", "words"])
        for i, c in enumerate(rep.substitution_hist):
            wr.writerow([i, int(c)])
    n, p = rep.ccdf()
    summary = {"W": W, "nbar": cfg.nbar, "words_compressed": rep.words_compressed,
               "mean_length": float((np.arange(len(rep.length_hist)) * rep.length_hist).sum() / rep.trials)}
    print(json.dumps(summary))
    write_manifest(cfg, ["ccdf.csv", "codebook.json", "loss_tables.json", "substitutions.csv"],
                   {"summary": summary})
    return 0


def cmd_simulate(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    W = cfg.W[0] if cfg.W else 36
    bank = _bank(cfg, W)
    rows, cols = cfg.extra.get("rows"), cfg.extra.get("cols")
    rep = run_sim(SimConfig(bank, cfg.channel_model(), cfg.trials, cfg.seed, cfg.nbar,
                            rows=rows, cols=cols))
    rep.write_csv(out / "sim_report.csv")
    rep.write_ccdf_csv(out / "ccdf.csv")
    print(f"GMI {rep.gmi:.6f} +- {rep.gmi_se:.6f} bits, compression loss {rep.compression_loss:.6f}")
    write_manifest(cfg, ["sim_report.csv", "ccdf.csv"], {"gmi": rep.gmi})
    return 0


def cmd_gap(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    channel = cfg.channel_model()
    nbar = cfg.nbar or 36
    n = int(round(math.log2(cfg.M)))
    target = unquantized_gmi(cfg.M, channel)
    results = {"target_gmi": target}
    if cfg.extra.get("quant"):
        bank = _bank(cfg, nbar)
        results["quant"] = design_gap(CompressedDesign(bank, None), channel, target)
    if cfg.extra.get("unopt"):
        if nbar % n:
            raise ConfigError(f"UNOPT needs N_bar divisible by {n}")
        bank = unopt_bank(cfg.M, nbar // n, channel)
        results["unopt"] = design_gap(CompressedDesign(bank, None), channel, target)
    if cfg.extra.get("comp"):
        best = None
        for W in cfg.W or range(nbar + 1, nbar + 13):
            d = CompressedDesign(_bank(cfg, W), nbar)
            g = design_gap(d, channel, target, cfg.trials, cfg.seed)
            if best is None or g < best[1]:
                best = (W, g)
        results["comp"] = best[1]
        results["comp_W"] = best[0]
    if "quant" in results and "unopt" in results:
        results["quant_advantage"] = results["unopt"] - results["quant"]
    with open(out / "gap.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["quantity", "value"])
        for key, val in results.items():
            wr.writerow([key, val])
    print(json.dumps(results))
    write_manifest(cfg, ["gap.csv"], {"results": results})
    return 0


def cmd_memory(cfg: RunConfig) -> int:
    out = Path(cfg.out)
    ex = cfg.extra
    if ex.get("preset") == "table6":
        rows = table6()
    else:
        ref = conv_memory(ex["n_s"], ex["b_s"], ex["b_h"], ex["n_b"], ex["w_conv"], cfg.M)
        W = cfg.W[0] if cfg.W else ex["w_conv"]
        prop = proposed_memory(ex["n_s"], cfg.nbar, ex["n_b"], W, cfg.M, compressed=cfg.nbar is not None)
        rows = [("custom", ref, None), ("custom", prop, ref)]
    write_table_csv(rows, out / "memory.csv")
    for target, rep, ref in rows:
        sd, bd, tot = rep.mbit()
        saved = "" if ref is None else f"{rep.savings(ref):.1f}%"
        print(f"{target:7s} {rep.scheme:10s} {sd:5.2f} {bd:5.2f} {tot:5.2f} {saved}")
    write_manifest(cfg, ["memory.csv"])
    return 0


COMMANDS = {
    "design": cmd_design,
    "compress-stats": cmd_compress_stats,
    "simulate": cmd_simulate,
    "gap": cmd_gap,
    "memory": cmd_memory,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="llrquant", description=__doc__.splitlines()[1])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--m", type=int, default=4096, help="constellation size")
        sp.add_argument("--channel", choices=(AWGN, RAYLEIGH), default=AWGN)
        sp.add_argument("--cn", type=float, default=None, help="C/N in dB (default: working point)")
        sp.add_argument("--objective", choices=OBJECTIVES, default=DEFAULT_OBJECTIVE)
        sp.add_argument("--w-max", type=int, default=W_MAX)
        sp.add_argument("--W", default=None, help="bit budget(s): N, a..b or a..b:step")
        sp.add_argument("--nbar", type=int, default=None, help="compressed word size")
        sp.add_argument("--trials", type=int, default=100_000)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=".")
        sp.add_argument("--cache", default=None, help="cache dir (overrides LLRQUANT_CACHE)")

    d = sub.add_parser("design", help="optimal steps, MI table and bit allocation")
    common(d)
    d.add_argument("--w-range", default=None)
    d.add_argument("--alloc", action="store_true")
    d.add_argument("--verify-exhaustive", action="store_true")

    c = sub.add_parser("compress-stats", help="word-length CCDF and substitution losses")
    common(c)

    s = sub.add_parser("simulate", help="Monte Carlo of the storage chain")
    common(s)
    s.add_argument("--rows", type=int, default=None)
    s.add_argument("--cols", type=int, default=None)

    g = sub.add_parser("gap", help="SNR gap against unquantized LLRs")
    common(g)
    g.add_argument("--quant", action="store_true")
    g.add_argument("--unopt", action="store_true")
    g.add_argument("--comp", action="store_true")

    m = sub.add_parser("memory", help="de-interleaver memory sizes")
    common(m)
    m.add_argument("--preset", choices=("table6",), default=None)
    m.add_argument("--n-s", type=int, default=51776)
    m.add_argument("--n-b", type=int, default=64800)
    m.add_argument("--b-s", type=int, default=15)
    m.add_argument("--b-h", type=int, default=14)
    m.add_argument("--w-conv", type=int, default=60)
    return p


def config_from_args(args) -> RunConfig:
    extra = {}
    for key in ("w_range", "alloc", "verify_exhaustive", "rows", "cols", "quant", "unopt", "comp",
                "preset", "n_s", "n_b", "b_s", "b_h", "w_conv"):
        if hasattr(args, key):
            extra[key] = getattr(args, key)
    if extra.get("w_range"):
        extra["w_range"] = parse_range(extra["w_range"])
    if (extra.get("rows") is None) != (extra.get("cols") is None):
        raise ConfigError("--rows and --cols go together")
    if args.command in ("simulate", "compress-stats") and args.trials < MIN_TRIALS:
        raise ConfigError(f"--trials must be at least {MIN_TRIALS}")
    return RunConfig(
        command=args.command, M=args.m, channel=args.channel, cn_db=args.cn,
        objective=args.objective, w_max=args.w_max,
        W=parse_range(args.W) if args.W else [], nbar=args.nbar, trials=args.trials,
        seed=args.seed, out=args.out, cache=args.cache, extra=extra,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        return COMMANDS[cfg.command](cfg)
    except LlrQuantError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    raise SystemExit(main())
