"""Command-line interface.

One batch-oriented executable, `xview`, exposes the pipeline: the two view
transforms, synthetic dataset generation, descriptor database construction,
coarse retrieval, fine-grained localization, metric evaluation, and the
correlation backend benchmark. Every run echoes its resolved configuration;
identical configuration and seed reproduce outputs byte for byte (timing
fields of the benchmark excepted).

Exit codes: 0 success, 2 usage/validation, 3 I/O, 4 data format.
"""

from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import evaluation, features, finegrain, img, matching, synth, transforms

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_FORMAT = 4


def _echo_config(name: str, args: argparse.Namespace) -> None:
    pairs = sorted((k, v) for k, v in vars(args).items() if k != "func")
    rendered = " ".join(f"{k}={v}" for k, v in pairs)
    print(f"xview {name}: {rendered}")


def _parse_center(text: str | None):
    if text is None:
        return None
    try:
        u, v = text.split(",")
        return float(u), float(v)
    except ValueError as exc:
        raise ValueError(f"--center expects 'u,v', got {text!r}") from exc


def _write_params(path: Path, params: dict) -> None:
    lines = [f"{k}={v}" for k, v in sorted(params.items())]
    path.write_text("\n".join(lines) + "\n")


def _read_manifest(dataset: Path) -> list[dict]:
    manifest = dataset / "manifest.csv"
    if not manifest.is_file():
        raise OSError(f"{manifest}: dataset manifest not found")
    rows = []
    with open(manifest, newline="") as fh:
        for row in csv.DictReader(fh):
            try:
                rows.append({
                    "id": int(row["id"]),
                    "x_m": float(row["x_m"]),
                    "y_m": float(row["y_m"]),
                    "azimuth_deg": float(row["azimuth_deg"]),
                    "offset_du_px": int(row["offset_du_px"]),
                    "offset_dv_px": int(row["offset_dv_px"]),
                    "fov": float(row["fov"]),
                })
            except (KeyError, ValueError) as exc:
                raise evaluation.DbFormatError(f"{manifest}: bad manifest row {row}", 0) from exc
    return rows


def cmd_polar(args) -> int:
    if args.hg < 1:
        raise ValueError("--hg must be >= 1")
    if args.wg < 1:
        raise ValueError("--wg must be >= 1")
    sat = img.load_png(args.input)
    p = transforms.PolarParams.for_satellite(
        sat, target_h=args.hg, target_w=args.wg,
        center=_parse_center(args.center),
        max_radius=args.radius if args.radius is not None else 0.0)
    out = transforms.polar_transform(sat, p)
    img.save_png(out, args.out)
    _write_params(Path(str(args.out) + ".params.txt"), {
        "transform": "polar", "input": args.input, "hg": p.target_h, "wg": p.target_w,
        "u0": p.u0, "v0": p.v0, "max_radius": p.max_radius,
    })
    print(f"wrote {out.shape[0]}x{out.shape[1]} polar view to {args.out}")
    return 0


def cmd_project(args) -> int:
    if args.hg < 1 or args.hg % 2 != 0:
        raise ValueError("--hg must be a positive even number")
    if args.wg < 1:
        raise ValueError("--wg must be >= 1")
    if args.mpp <= 0:
        raise ValueError("--mpp must be > 0")
    if args.z2 <= 0:
        raise ValueError("--z2 must be > 0")
    sat = img.load_png(args.input)
    p = transforms.ProjParams.for_satellite(
        sat, mpp=args.mpp, cam_height=args.z2,
        target_h=args.hg, target_w=args.wg, center=_parse_center(args.center))
    out = transforms.projective_transform(sat, p)
    img.save_png(out, args.out)
    _write_params(Path(str(args.out) + ".params.txt"), {
        "transform": "projective", "input": args.input, "hg": p.target_h,
        "wg": p.target_w, "u0": p.u0, "v0": p.v0,
        "px_per_m": p.px_per_m, "cam_height": p.cam_height,
    })
    print(f"wrote {out.shape[0]}x{out.shape[1]} projective view to {args.out}")
    return 0


def cmd_synth(args) -> int:
    fovs = [float(f) for f in args.fov_list.split(",") if f]
    out = synth.make_dataset(
        args.out, seed=args.seed, n_scenes=args.n_scenes,
        offset_max_px=args.offset_max_px, fov_list=fovs,
        extent_m=args.extent, sat_size=args.sat_size, mpp=args.mpp,
        pano_h=args.pano_h, pano_w=args.pano_w, cam_height=args.z2)
    print(f"wrote {args.n_scenes} scenes to {out}")
    return 0


def _dataset_references(rows, mpp):
    """Unique (id, geotag) pairs; the crop center backs out the camera offset."""
    refs = {}
    for r in rows:
        refs.setdefault(r["id"], (r["x_m"] - r["offset_du_px"] * mpp,
                                  r["y_m"] + r["offset_dv_px"] * mpp))
    return sorted(refs.items())


def cmd_db_build(args) -> int:
    dataset = Path(args.dataset)
    rows = _read_manifest(dataset)
    refs = _dataset_references(rows, args.mpp)

    def build(item):
        ref_id, geotag = item
        sat = img.load_png(dataset / "scenes" / f"{ref_id:04d}" / "sat.png")
        polar = transforms.PolarParams.for_satellite(sat, args.pano_h, args.pano_w)
        proj = transforms.ProjParams.for_satellite(
            sat, mpp=args.mpp, cam_height=args.z2,
            target_h=args.pano_h, target_w=args.pano_w)
        return features.satellite_descriptor(sat, polar, proj)

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            descs = list(pool.map(build, refs))
    else:
        descs = [build(item) for item in refs]
    db = evaluation.DescriptorDB([i for i, _ in refs], [g for _, g in refs], np.stack(descs))
    db.save(args.out)
    print(f"wrote descriptor database of {len(db)} references to {args.out}")
    return 0


def cmd_locate_coarse(args) -> int:
    db = evaluation.DescriptorDB.load(args.db)
    dataset = Path(args.dataset)
    rows = [r for r in _read_manifest(dataset) if r["fov"] == args.fov]
    if not rows:
        raise ValueError(f"dataset has no panoramas with fov {args.fov}")

    def locate(row):
        pano = img.load_png(dataset / "scenes" / f"{row['id']:04d}" / f"pano_{int(row['fov'])}.png")
        desc = features.ground_descriptor(pano, fov_deg=row["fov"])
        return db.rank(desc, fov_deg=row["fov"])[:args.top_k]

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            ranked = list(pool.map(locate, rows))
    else:
        ranked = [locate(r) for r in rows]

    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["query_id", "rank", "ref_id", "shift", "azimuth_deg", "similarity"])
        for row, matches in zip(rows, ranked):
            for rank, m in enumerate(matches, start=1):
                writer.writerow([row["id"], rank, m.ref_id, m.shift,
                                 m.azimuth_deg, m.similarity])
    print(f"wrote rankings for {len(rows)} queries to {args.out}")
    return 0


def cmd_locate_fine(args) -> int:
    sat = img.load_png(args.sat)
    query = img.load_png(args.query)
    pano_h = query.shape[0]
    pano_w = int(round(query.shape[1] * 360.0 / args.fov))
    proj = transforms.ProjParams.for_satellite(
        sat, mpp=args.mpp, cam_height=args.z2, target_h=pano_h, target_w=pano_w)
    cfg = finegrain.SearchConfig(
        proj=proj, region_half=args.region_half, grid_step=args.grid_step,
        n_orient=args.n_orient, fov=args.fov, mpp=args.mpp, inclusive=args.inclusive)
    res = finegrain.fine_localize(sat, query, cfg, threads=args.threads)
    record = (f"query_id={Path(args.query).stem} du_px={res.du} dv_px={res.dv} "
              f"x_m={res.offset_m[0]} y_m={res.offset_m[1]} "
              f"azimuth_deg={res.azimuth_deg} ssim={res.score}")
    Path(args.out).write_text(record + "\n")
    if args.heatmap:
        lo, hi = res.score_map.min(), res.score_map.max()
        scaled = (res.score_map - lo) / (hi - lo) if hi > lo else np.zeros_like(res.score_map)
        img.save_png(scaled.astype(np.float32)[:, :, None], args.heatmap)
    print(record)
    return 0


def cmd_eval(args) -> int:
    dataset = Path(args.dataset)
    rows = [r for r in _read_manifest(dataset) if r["fov"] == args.fov]
    truth = {r["id"]: r for r in rows}
    geotags = dict(_dataset_references(rows, args.mpp))

    by_query: dict[int, list] = {}
    with open(args.results, newline="") as fh:
        for rec in csv.DictReader(fh):
            try:
                qid = int(rec["query_id"])
                match = matching.MatchResult(
                    ref_id=int(rec["ref_id"]), shift=int(rec["shift"]),
                    azimuth_deg=float(rec["azimuth_deg"]),
                    similarity=float(rec["similarity"]))
            except (KeyError, ValueError) as exc:
                raise evaluation.DbFormatError(f"{args.results}: bad row {rec}", 0) from exc
            by_query.setdefault(qid, []).append(match)

    results = []
    for qid, matches in sorted(by_query.items()):
        if qid not in truth:
            raise ValueError(f"query {qid} not in manifest at fov {args.fov}")
        t = truth[qid]
        results.append(evaluation.RetrievalResult(
            query_id=qid, truth_ref_id=qid, truth_azimuth_deg=t["azimuth_deg"],
            matches=matches, query_pos=(t["x_m"], t["y_m"])))

    ks = [int(k) for k in args.ks.split(",") if k]
    loc_acc = evaluation.recall_at_k(results, 1)
    orien_acc = evaluation.orientation_accuracy(results, args.fov)
    table = [("queries", len(results))]
    for k in ks:
        table.append((f"r@{k}", f"{evaluation.recall_at_k(results, k):.4f}"))
    for k in ks:
        table.append((f"dist_recall@{k} (r={args.radius}m)",
                      f"{evaluation.distance_recall(results, geotags, args.radius, k):.4f}"))
    table.append(("loc_acc", f"{loc_acc:.4f}"))
    table.append(("orien_acc", "n/a" if orien_acc is None else f"{orien_acc:.4f}"))
    table.append(("overall", "n/a" if orien_acc is None
                  else f"{evaluation.overall(loc_acc, orien_acc):.4f}"))

    text = "\n".join(f"{name:<28} {value}" for name, value in table)
    print(text)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "value"])
            writer.writerows(table)
    return 0


def cmd_bench(args) -> int:
    report = evaluation.bench_correlation(
        n_refs=args.n, h=args.h, w=args.w, c=args.c,
        repetitions=args.reps, seed=args.seed)
    text = evaluation.format_bench_report(report)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="xview",
        description="Ground-to-overhead camera localization toolkit")
    parser.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    parser.add_argument("--threads", type=int, default=1, help="worker thread cap")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("polar", help="polar-transform an overhead PNG")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--hg", type=int, default=128)
    p.add_argument("--wg", type=int, default=512)
    p.add_argument("--center", default=None, help="projection center 'u,v' (default image center)")
    p.add_argument("--radius", type=float, default=None, help="max radius (default S/2)")
    p.set_defaults(func=cmd_polar)

    p = sub.add_parser("project", help="projective-transform an overhead PNG")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--hg", type=int, default=128)
    p.add_argument("--wg", type=int, default=512)
    p.add_argument("--center", default=None)
    p.add_argument("--mpp", type=float, default=transforms.DEFAULT_MPP)
    p.add_argument("--z2", type=float, default=transforms.DEFAULT_CAM_HEIGHT)
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--n-scenes", type=int, default=50)
    p.add_argument("--offset-max-px", type=int, default=0)
    p.add_argument("--fov-list", default="360")
    p.add_argument("--extent", type=float, default=synth.DEFAULT_EXTENT)
    p.add_argument("--sat-size", type=int, default=256)
    p.add_argument("--mpp", type=float, default=transforms.DEFAULT_MPP)
    p.add_argument("--pano-h", type=int, default=128)
    p.add_argument("--pano-w", type=int, default=512)
    p.add_argument("--z2", type=float, default=transforms.DEFAULT_CAM_HEIGHT)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("db-build", help="build a descriptor database from a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mpp", type=float, default=transforms.DEFAULT_MPP)
    p.add_argument("--z2", type=float, default=transforms.DEFAULT_CAM_HEIGHT)
    p.add_argument("--pano-h", type=int, default=128)
    p.add_argument("--pano-w", type=int, default=512)
    p.set_defaults(func=cmd_db_build)

    p = sub.add_parser("locate-coarse", help="rank database references per query")
    p.add_argument("--db", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--fov", type=float, default=360.0)
    p.add_argument("--top-k", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_locate_coarse)

    p = sub.add_parser("locate-fine", help="fine location/orientation search")
    p.add_argument("--sat", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("--fov", type=float, default=360.0)
    p.add_argument("--out", required=True)
    p.add_argument("--heatmap", default=None, help="optional score map PNG")
    p.add_argument("--region-half", type=int, default=10)
    p.add_argument("--grid-step", type=int, default=1)
    p.add_argument("--n-orient", type=int, default=128)
    p.add_argument("--inclusive", action="store_true",
                   help="include the +region_half edge (odd grid)")
    p.add_argument("--mpp", type=float, default=transforms.DEFAULT_MPP)
    p.add_argument("--z2", type=float, default=transforms.DEFAULT_CAM_HEIGHT)
    p.set_defaults(func=cmd_locate_fine)

    p = sub.add_parser("eval", help="compute retrieval metrics from rankings")
    p.add_argument("--results", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--fov", type=float, default=360.0)
    p.add_argument("--ks", default="1,5,10")
    p.add_argument("--radius", type=float, default=5.0)
    p.add_argument("--mpp", type=float, default=transforms.DEFAULT_MPP)
    p.add_argument("--out", default=None, help="optional metrics CSV")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="time the correlation backends")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--h", type=int, default=4)
    p.add_argument("--w", type=int, default=64)
    p.add_argument("--c", type=int, default=16)
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _echo_config(args.command, args)
    try:
        return args.func(args)
    except evaluation.DbFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
