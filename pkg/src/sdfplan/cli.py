"""Command-line surface for the full pipeline.

Subcommands: synth-dataset, train-sdf, eval-sdf, plan2d, plan-arm, timeparam.
Every run writes a manifest next to its outputs; delimited text outputs carry
the manifest id in their header and are byte-identical for identical
command + seed. Report figures (PNG) are rendered alongside the text outputs.

Exit codes: 0 success, 1 planner ran but failed, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np
import yaml

from sdfplan import gp_prior, mesh as mesh_mod, neural_sdf, planner, scenes, timeparam
from sdfplan.fixtures import data_path
from sdfplan.manifest import RunManifest
from sdfplan.robot import RobotDescriptionError, load_robot

CONFIG_VERSION = 1


class InputError(Exception):
    pass


def _fail(code: int, message: str, **extra) -> int:
    sys.stderr.write(json.dumps({"error": message, **extra}, sort_keys=True) + "\n")
    return code


def load_config(path: str | Path | None) -> dict:
    if path is None:
        return {}
    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise InputError(f"{path}: config must be a mapping")
    if doc.get("version", CONFIG_VERSION) != CONFIG_VERSION:
        raise InputError(f"{path}: unsupported config version {doc.get('version')!r}")
    return doc


def planner_config(cfg: dict, seed: int) -> planner.PlannerConfig:
    section = dict(cfg.get("planner", {}))
    section["seed"] = seed
    return planner.PlannerConfig(**section)


def cost_spec(cfg: dict) -> planner.CostSpec:
    return planner.CostSpec(**cfg.get("cost", {}))


def train_config(cfg: dict, seed: int) -> neural_sdf.TrainConfig:
    section = dict(cfg.get("train", {}))
    section["seed"] = seed
    return neural_sdf.TrainConfig(**section)


def _set_threads(n: int) -> None:
    import numba

    numba.set_num_threads(max(1, n))


def _resolve_link_mesh(robot_path: str, link: int) -> Path:
    model = load_robot(robot_path)
    if not 0 <= link < model.n_links:
        raise InputError(f"link index {link} out of range ({model.n_links} links)")
    mesh_path = model.links[link].mesh_path
    if mesh_path is None:
        raise InputError(f"link {link} has no mesh reference")
    return mesh_path


def cmd_synth(args) -> int:
    manifest = RunManifest(command="synth-dataset", seed=args.seed, config={
        "offsets": args.offsets, "max_samples": args.max_samples, "link": args.link})
    t0 = time.time()
    if args.mesh:
        mesh_path = Path(args.mesh)
    else:
        if not args.robot:
            raise InputError("need --mesh or --robot with --link")
        mesh_path = _resolve_link_mesh(args.robot, args.link)
        manifest.add_input(args.robot)
    if not mesh_path.exists():
        return _fail(2, "mesh not found", path=str(mesh_path))
    manifest.add_input(mesh_path)
    tri = mesh_mod.load_mesh(mesh_path)
    offsets = tuple(args.offsets) if args.offsets else mesh_mod.DEFAULT_OFFSETS
    dataset = mesh_mod.synthesize_dataset(
        tri, offsets=offsets, max_samples=args.max_samples, seed=args.seed, link_index=args.link,
    )
    dataset.provenance["manifest"] = manifest.manifest_id
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    mesh_mod.save_dataset(dataset, out)
    manifest.timings["synthesize"] = time.time() - t0
    manifest.add_output(out)
    manifest.write(out.with_suffix(out.suffix + ".manifest.json"))
    print(f"wrote {len(dataset)} samples to {out}")
    return 0


def cmd_train(args) -> int:
    manifest = RunManifest(command="train-sdf", seed=args.seed)
    if not Path(args.dataset).exists():
        return _fail(2, "dataset not found", path=args.dataset)
    manifest.add_input(args.dataset)
    cfg = load_config(args.config)
    tcfg = train_config(cfg, args.seed)
    if args.epochs:
        tcfg = neural_sdf.TrainConfig(**{**tcfg.__dict__, "epochs": args.epochs})
    manifest.config = dict(tcfg.__dict__)
    dataset = mesh_mod.load_dataset(args.dataset)
    t0 = time.time()
    net, report = neural_sdf.train_link_sdf(dataset, tcfg)
    manifest.timings["train"] = time.time() - t0
    net.meta["manifest"] = manifest.manifest_id
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    neural_sdf.save_net(net, out)
    manifest.add_output(out)
    manifest.write(out.with_suffix(".manifest.json"))
    print(
        f"trained {tcfg.epochs} epochs; validation RMSD d={report.final_val_rmsd_d * 100:.3f} cm, "
        f"alignment={report.final_val_rmsd_align:.4f}"
    )
    return 0


def _parse_bands(text: str) -> list[tuple[float, float]]:
    bands = []
    for part in text.split(","):
        lo, hi = part.split(":")
        bands.append((float(lo), float(hi)))
    return bands


def cmd_eval(args) -> int:
    from sdfplan.plots import plot_rmsd_bands

    for path in (args.net, args.mesh):
        if not Path(path).exists():
            return _fail(2, "input not found", path=str(path))
    manifest = RunManifest(command="eval-sdf", seed=args.seed, config={"bands": args.bands, "n_points": args.n_points})
    manifest.add_input(args.net)
    manifest.add_input(args.mesh)
    net = neural_sdf.load_net(args.net)
    tri = mesh_mod.load_mesh(args.mesh)
    bands = _parse_bands(args.bands)
    t0 = time.time()
    rows = neural_sdf.eval_sdf_bands(net, tri, bands, n_points=args.n_points, seed=args.seed)
    manifest.timings["eval"] = time.time() - t0
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = out_dir / "rmsd_report.txt"
    with open(report, "w", encoding="utf-8") as fh:
        fh.write("# sdfplan-rmsd-report-v1\n")
        fh.write(f"# manifest: {manifest.manifest_id}\n")
        fh.write("# columns: band_lo band_hi n_points rmsd_d rmsd_align\n")
        for r in rows:
            fh.write(f"{r['lo']:.17g} {r['hi']:.17g} {r['n']} {r['rmsd_d']:.17g} {r['rmsd_align']:.17g}\n")
    fig = out_dir / "rmsd_bands.png"
    plot_rmsd_bands([r for r in rows if r["n"] > 0], fig)
    manifest.add_output(report)
    manifest.add_output(fig)
    manifest.write(out_dir / "eval.manifest.json")
    for r in rows:
        print(f"band [{r['lo']:g}, {r['hi']:g}) m: n={r['n']} RMSD d={r['rmsd_d'] * 100:.3f} cm "
              f"alignment={r['rmsd_align']:.4f}")
    return 0


def _write_samples_file(path: Path, samples: np.ndarray, manifest_id: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# sdfplan-sample-snapshot-v1\n")
        fh.write(f"# manifest: {manifest_id}\n")
        fh.write("# columns: sample waypoint x...\n")
        for i, row in enumerate(samples):
            for j, state in enumerate(row):
                fh.write(f"{i} {j} " + " ".join(f"{x:.17g}" for x in state) + "\n")


def _snapshot_samples(result: planner.PlanResult, cfg: planner.PlannerConfig, start, goal):
    """Reconstruct the exact sample bundles of the first and last iterations."""
    times = np.linspace(0.0, 1.0, cfg.horizon + 1)

    def bundle(iteration: int):
        mean = None if iteration == 0 else result.means[iteration - 1]
        prior = gp_prior.condition_on_endpoints(
            times, start, goal, gp_prior.GpHyper(result.sigma_f[iteration], cfg.h), mean=mean
        )
        return gp_prior.sample_states(prior, cfg.n_samples, seed=planner._iter_seed(cfg.seed, iteration))

    return bundle(0), bundle(result.iterations - 1)


def cmd_plan2d(args) -> int:
    from sdfplan.plots import plot_iteration_curves, plot_plan2d

    if not Path(args.scene).exists():
        return _fail(2, "scene not found", path=args.scene)
    cfg_doc = load_config(args.config)
    scene = scenes.load_scene(args.scene)
    if not isinstance(scene, scenes.Scene2D):
        return _fail(2, "scene is not 2D", path=args.scene)
    cfg = planner_config(cfg_doc, args.seed)
    spec = cost_spec(cfg_doc)
    manifest = RunManifest(command="plan2d", seed=args.seed,
                           config={"planner": cfg_doc.get("planner", {}), "cost": cfg_doc.get("cost", {})})
    manifest.add_input(args.scene)
    if args.config:
        manifest.add_input(args.config)
    checker = scenes.checker_2d(scene)
    t0 = time.time()
    try:
        result = planner.plan(scene.start, scene.goal, checker, cfg, spec)
    except planner.PlannerDiverged as exc:
        return _fail(1, "planner diverged", iteration=exc.iteration)
    manifest.timings["plan"] = time.time() - t0
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mid = manifest.manifest_id
    planner.save_trajectory(result.final.states, out_dir / "trajectory.txt", mid)
    planner.save_plan_log(result, out_dir / "plan_log.txt", mid)
    first, last = _snapshot_samples(result, cfg, scene.start, scene.goal)
    _write_samples_file(out_dir / "samples_first.txt", first, mid)
    _write_samples_file(out_dir / "samples_last.txt", last, mid)
    plot_plan2d(scene, result, out_dir / "plan2d.png", first, last)
    plot_iteration_curves(result, out_dir / "curves.png")
    for name in ("trajectory.txt", "plan_log.txt", "samples_first.txt", "samples_last.txt",
                 "plan2d.png", "curves.png"):
        manifest.add_output(out_dir / name)
    manifest.write(out_dir / "plan2d.manifest.json")
    print(f"success={result.success} iterations={result.iterations} "
          f"final_obs={result.obs_cost[-1]:g} length={planner.length_cost(result.final):.4f}")
    return 0 if result.success else 1


def cmd_plan_arm(args) -> int:
    from sdfplan.plots import plot_iteration_curves

    for path in (args.scene, args.robot):
        if not Path(path).exists():
            return _fail(2, "input not found", path=str(path))
    cfg_doc = load_config(args.config)
    scene = scenes.load_scene(args.scene)
    if not isinstance(scene, scenes.Scene3D):
        return _fail(2, "scene is not 3D", path=args.scene)
    model = load_robot(args.robot)
    manifest = RunManifest(command="plan-arm", seed=args.seed,
                           config={"planner": cfg_doc.get("planner", {}), "cost": cfg_doc.get("cost", {}),
                                   "nets": bool(args.nets)})
    manifest.add_input(args.scene)
    manifest.add_input(args.robot)
    if args.nets:
        net_paths = sorted(Path(args.nets).glob("*.npz"))
        if len(net_paths) != model.n_links:
            return _fail(2, "need one net per link", expected=model.n_links, found=len(net_paths))
        nets = tuple(neural_sdf.load_net(p) for p in net_paths)
        sdf = neural_sdf.CompositeSdf(nets=nets, model=model)
        checker = scenes.scene3d_checker(scene, sdf)
    else:
        meshes = []
        for link in model.links:
            if link.mesh_path is None or not link.mesh_path.exists():
                return _fail(2, "link mesh not found", link=link.name)
            meshes.append(mesh_mod.load_mesh(link.mesh_path))
        checker = scenes.scene3d_checker(scene, (model, meshes))
    cfg = planner_config(cfg_doc, args.seed)
    spec = cost_spec(cfg_doc)
    t0 = time.time()
    try:
        result = planner.plan(scene.start_q, scene.goal_q, checker, cfg, spec, model=model)
    except planner.PlannerDiverged as exc:
        return _fail(1, "planner diverged", iteration=exc.iteration)
    manifest.timings["plan"] = time.time() - t0
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mid = manifest.manifest_id
    planner.save_trajectory(result.final.states, out_dir / "trajectory.txt", mid)
    planner.save_plan_log(result, out_dir / "plan_log.txt", mid)
    plot_iteration_curves(result, out_dir / "curves.png")
    for name in ("trajectory.txt", "plan_log.txt", "curves.png"):
        manifest.add_output(out_dir / name)
    manifest.write(out_dir / "plan_arm.manifest.json")
    print(f"success={result.success} iterations={result.iterations} final_obs={result.obs_cost[-1]:g}")
    return 0 if result.success else 1


def cmd_timeparam(args) -> int:
    from sdfplan.plots import plot_timed_profile

    if not Path(args.traj).exists():
        return _fail(2, "trajectory not found", path=args.traj)
    traj = planner.load_trajectory(args.traj)
    if args.robot:
        model = load_robot(args.robot)
        if model.n_dof != traj.dim:
            return _fail(2, "robot DoF does not match trajectory dimension",
                         n_dof=model.n_dof, dim=traj.dim)
        vel = model.vel_limits()
        acc = model.acc_limits()
    elif args.vel_limit and args.acc_limit:
        vel = np.full(traj.dim, args.vel_limit)
        acc = np.full(traj.dim, args.acc_limit)
    else:
        return _fail(2, "need --robot or both --vel-limit and --acc-limit")
    manifest = RunManifest(command="timeparam", seed=args.seed, config={"grid": args.grid})
    manifest.add_input(args.traj)
    if args.robot:
        manifest.add_input(args.robot)
    t0 = time.time()
    path = timeparam.fit_spline(traj)
    timed = timeparam.time_parameterize(path, vel, acc, grid=args.grid)
    manifest.timings["timeparam"] = time.time() - t0
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = out_dir / "timed_trajectory.txt"
    timeparam.save_timed_trajectory(timed, out)
    plot_timed_profile(timed, out_dir / "profile.png", vel, acc)
    manifest.add_output(out)
    manifest.add_output(out_dir / "profile.png")
    manifest.write(out_dir / "timeparam.manifest.json")
    util_v = float(np.max(np.abs(timed.velocities) / vel[None, :])) if timed.duration else 0.0
    util_a = float(np.max(np.abs(timed.accelerations) / acc[None, :])) if timed.duration else 0.0
    print(f"duration={timed.duration:.4f} s peak_vel_util={util_v:.3f} peak_acc_util={util_a:.3f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdfplan", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--seed", type=int, default=0, help="root RNG seed (default 0)")
    parser.add_argument("--threads", type=int, default=2, help="worker threads for batched kernels")
    parser.add_argument("--config", default=None, help="YAML config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth-dataset", help="synthesize an SDF training dataset from a link mesh")
    p.add_argument("--robot", default=None, help="robot description; mesh taken from --link")
    p.add_argument("--link", type=int, default=0)
    p.add_argument("--mesh", default=None, help="mesh file (overrides --robot/--link)")
    p.add_argument("--offsets", type=float, nargs="*", default=None)
    p.add_argument("--max-samples", type=int, default=20000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train-sdf", help="train a link SDF network from a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--epochs", type=int, default=None, help="override config epochs")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval-sdf", help="per-band RMSD report of a net vs the exact oracle")
    p.add_argument("--net", required=True)
    p.add_argument("--mesh", required=True)
    p.add_argument("--bands", default="0:0.4,0.4:0.8,0.8:1.2", help="comma-separated lo:hi pairs, meters")
    p.add_argument("--n-points", type=int, default=2000)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plan2d", help="plan a 2D point trajectory in a scene")
    p.add_argument("--scene", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_plan2d)

    p = sub.add_parser("plan-arm", help="plan an arm trajectory against scene obstacles")
    p.add_argument("--scene", required=True)
    p.add_argument("--robot", required=True)
    p.add_argument("--nets", default=None, help="directory of per-link nets; exact oracle if omitted")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_plan_arm)

    p = sub.add_parser("timeparam", help="time-parameterize a waypoint trajectory")
    p.add_argument("--traj", required=True)
    p.add_argument("--robot", default=None)
    p.add_argument("--vel-limit", type=float, default=None)
    p.add_argument("--acc-limit", type=float, default=None)
    p.add_argument("--grid", type=int, default=timeparam.DEFAULT_GRID)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_timeparam)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _set_threads(args.threads)
    try:
        return args.func(args)
    except InputError as exc:
        return _fail(2, str(exc))
    except (FileNotFoundError, RobotDescriptionError, mesh_mod.MeshError, ValueError) as exc:
        return _fail(2, str(exc))
    except mesh_mod.DatasetSynthesisError as exc:
        return _fail(2, str(exc), stats=exc.stats)


if __name__ == "__main__":
    sys.exit(main())
