"""Command-line front end.

Exit codes: 0 success, 1 equivalence failure, 2 usage, parse or shape error.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from .densify import densify
from .errors import TimedilError
from .flops import cost_report
from .graph import DENSE, WINDOWED, build_fig1_toy, build_table1, infer_shapes, receptive_field_time
from .layers import ConvSpec, FullyConnectedSpec, PoolSpec
from .netfile import load_network, save_network
from .oracle import compare_outputs, eval_dense, eval_spliced, verify_equivalence
from .sbn import SbnSpec, build_sbn_as_cnn, eval_sbn_two_stage
from .tensor import Tensor3, load, pad_time, save, seeded_random

BUILTINS = ("table1", "fig1-toy", "sbn-default")


class CliError(Exception):
    pass


def load_net(args, with_weights=True):
    """Resolve a builtin name or a file; returns ``(net, sbn_spec_or_None)``."""
    name = args.network
    if name == "table1":
        return build_table1(args.outputs, args.net_seed, with_weights), None
    if name == "fig1-toy":
        return build_fig1_toy(args.net_seed), None
    if name == "sbn-default":
        spec = SbnSpec()
        return build_sbn_as_cnn(spec, args.net_seed), spec
    return load_network(name), None


def load_utterance(args, net):
    if args.input is not None:
        u = load(args.input)
    else:
        m, f, _ = net.input_shape
        u = seeded_random(m, f, args.len, args.seed)
    if getattr(args, "pad", False):
        rf = receptive_field_time(net)
        left = (rf - 1) // 2
        u = pad_time(u, left, rf - 1 - left)
    return u


def emit_rows(out, header, records):
    out.write("\t".join(header) + "\n")
    for rec in records:
        out.write("\t".join(str(v) for v in rec) + "\n")


# --- describe ----------------------------------------------------------------


def _label(layer):
    if isinstance(layer, ConvSpec):
        s = f"conv {layer.kernel_f}x{layer.kernel_t}"
        if (layer.dilation_f, layer.dilation_t) != (1, 1):
            s += f" dilation {layer.dilation_f}x{layer.dilation_t}"
        return s
    if isinstance(layer, PoolSpec):
        s = f"pool {layer.size_f}x{layer.size_t}"
        if (layer.stride_f, layer.stride_t) != (layer.size_f, layer.size_t):
            s += f" stride {layer.stride_f}x{layer.stride_t}"
        if layer.dilation_t != 1:
            s += f" dilation 1x{layer.dilation_t}"
        return s
    if isinstance(layer, FullyConnectedSpec):
        return "FC"
    return None


def _fmt_shape(shape):
    return " x ".join(str(d) for d in shape)


def describe_rows(net):
    """Table rows ``(label, shape)``; BN/ReLU/flatten are folded away and
    runs of equal-width FC layers are grouped as ``n x FC``."""
    trace = infer_shapes(net)
    rows = [("Input window", _fmt_shape(net.input_shape))]
    for layer, shape in zip(net.layers, trace.shapes):
        label = _label(layer)
        if label is None:
            continue
        rows.append([label, _fmt_shape(shape), 1])
    out = [rows[0]]
    for row in rows[1:]:
        prev = out[-1]
        if row[0] == "FC" and len(prev) == 3 and prev[0].endswith("FC") and prev[1] == row[1]:
            prev[2] += 1
            prev[0] = f"{prev[2]} x FC"
        else:
            out.append(row)
    return [(r[0], r[1]) for r in out]


def describe_text(net) -> str:
    lines = [f"{'Layer':<24}Output: fmaps x f x T"]
    lines += [f"{label:<24}{shape}" for label, shape in describe_rows(net)]
    lines.append(f"receptive_field_time {receptive_field_time(net)}")
    lines.append(f"mode {net.mode}")
    return "\n".join(lines) + "\n"


def cmd_describe(args, out):
    net, _ = load_net(args, with_weights=False)
    if args.format == "rows":
        emit_rows(out, ("row", "layer", "shape"), [(i, l, s) for i, (l, s) in enumerate(describe_rows(net))])
    else:
        out.write(describe_text(net))
    return 0


# --- densify -----------------------------------------------------------------


def cmd_densify(args, out):
    net, _ = load_net(args)
    dense, report = densify(net)
    if args.output:
        save_network(dense, args.output)
        if not args.report:
            out.write(f"wrote {args.output} (receptive field {report.receptive_field_after})\n")
            return 0
    if args.format == "rows":
        recs = [("rewrite", r.index, r.kind, r.old_stride_t, r.new_stride_t, r.old_dilation_t,
                 r.new_dilation_t, r.factor_after) for r in report.rewrites]
        recs += [("fc", c.index, "fc", c.in_dim, c.out_dim, c.kernel_f, c.kernel_t, c.dilation_t)
                 for c in report.fc_conversions]
        emit_rows(out, ("record", "index", "kind", "a", "b", "c", "d", "e"), recs)
    else:
        out.write(report.to_text())
    return 0


# --- verify ------------------------------------------------------------------


def cmd_verify(args, out):
    net, sbn_spec = load_net(args)
    utt = load_utterance(args, net)
    if sbn_spec is not None:
        ref = eval_sbn_two_stage(sbn_spec, utt, args.net_seed)
        report = compare_outputs(ref, eval_dense(net, utt), args.tol)
    else:
        if net.mode != WINDOWED:
            raise CliError("verify needs a windowed network (or sbn-default)")
        dense = load_network(args.dense) if args.dense else None
        report = verify_equivalence(net, utt, args.tol, dense=dense)
    if args.format == "rows":
        emit_rows(out, report.FIELDS, [[getattr(report, k) for k in report.FIELDS]])
    else:
        out.write(report.to_text())
    return 0 if report.passed else 1


# --- flops -------------------------------------------------------------------


def cmd_flops(args, out):
    net, _ = load_net(args, with_weights=False)
    if net.mode != WINDOWED:
        raise CliError("flops needs a windowed network")
    report = cost_report(net, args.len)
    if args.format == "rows":
        emit_rows(out, ("record", "a", "b", "c", "d", "e", "f", "g"), report.rows())
    else:
        out.write(report.to_text())
    return 0


# --- eval --------------------------------------------------------------------


def cmd_eval(args, out):
    net, _ = load_net(args)
    utt = load_utterance(args, net)
    if args.mode == "spliced":
        if net.mode != WINDOWED:
            raise CliError(f"spliced evaluation needs a windowed network, got {net.mode}")
        vecs = eval_spliced(net, utt)
    else:
        if net.mode == WINDOWED:
            net = densify(net)[0]
        elif net.mode != DENSE:
            raise CliError(f"dense evaluation cannot run a {net.mode} network")
        vecs = eval_dense(net, utt)
    result = Tensor3._wrap(np.ascontiguousarray(vecs.T).reshape(vecs.shape[1], 1, vecs.shape[0]))
    save(result, args.output)
    out.write(f"wrote {args.output} {result.fmaps} x 1 x {result.time}\n")
    return 0


# --- wiring ------------------------------------------------------------------


def _add_net_args(p):
    p.add_argument("network", help=f"network file or builtin ({', '.join(BUILTINS)})")
    p.add_argument("--outputs", type=int, default=32000, help="table1 classifier width")
    p.add_argument("--net-seed", type=int, default=0, help="weight seed for builtins")
    p.add_argument("--format", choices=("text", "rows"), default="text")


def _add_utt_args(p, pad=True):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", help="utterance tensor dump")
    src.add_argument("--len", type=int, help="synthetic utterance length in frames")
    p.add_argument("--seed", type=int, default=0, help="synthetic utterance seed")
    if pad:
        p.add_argument("--pad", action="store_true",
                       help="zero-pad the utterance so every input frame gets an output")


def build_parser():
    parser = argparse.ArgumentParser(prog="timedil", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("describe", help="print the per-layer shape table")
    _add_net_args(p)
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("densify", help="rewrite a windowed net for dense prediction")
    _add_net_args(p)
    p.add_argument("-o", "--output", help="write the dense network here")
    p.add_argument("--report", action="store_true", help="print the rewrite report (default when no -o is given)")
    p.set_defaults(func=cmd_densify)

    p = sub.add_parser("verify", help="check dense evaluation against sliding windows")
    _add_net_args(p)
    _add_utt_args(p)
    p.add_argument("--tol", type=float, default=0.0)
    p.add_argument("--dense", help="dense network file to check instead of densifying")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("flops", help="analytic MAC counts, spliced vs dense")
    _add_net_args(p)
    p.add_argument("--len", type=int, required=True)
    p.set_defaults(func=cmd_flops)

    p = sub.add_parser("eval", help="evaluate a net and write the output tensor")
    _add_net_args(p)
    _add_utt_args(p)
    p.add_argument("--mode", choices=("spliced", "dense"), required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except (TimedilError, CliError, OSError) as exc:
        print(f"timedil {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
