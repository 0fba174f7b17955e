"""Command-line interface: count, eval, stitch, cluster."""
from __future__ import annotations

import csv
import json
import logging
import sys
from pathlib import Path

import click

from . import datasets
from .config import PipelineConfig, from_profile, load_config_file, apply_overrides
from .embedding import dump_features, load_features
from .errors import ConfigError, DataError, OccamError, ProviderError
from .finch import ThresholdSchedule, finch_threshold_cluster
from .imaging import load_image, rle_encode, save_png
from .pipeline import build_backends, count_image, evaluate_records

log = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_PROVIDER = 3
EXIT_DATA = 4


def _build_config(profile, config_file, provider, embedder, mask_processing, clustering, scaling, spacing, seed, workers) -> PipelineConfig:
    """Precedence: profile defaults < config file < explicit CLI flags."""
    cfg = from_profile(profile)
    if config_file:
        cfg = load_config_file(config_file, cfg)
    overrides = {
        key: value
        for key, value in {
            "mask_processing": mask_processing,
            "clustering": clustering,
            "scaling": scaling,
            "seed": seed,
            "workers": workers,
            "provider_spec": provider,
            "embedder_spec": embedder,
            "grid_spacing": spacing,
        }.items()
        if value is not None
    }
    return apply_overrides(cfg, overrides)


def common_options(fn):
    fn = click.option("--profile", default="S", show_default=True, help="Config profile: S (single-class) or M (multi-class).")(fn)
    fn = click.option("--config", "config_file", type=click.Path(exists=False), default=None, help="JSON config overrides.")(fn)
    fn = click.option("--provider", default=None, help="mock, file:<dir>, or wire:<command or URL>.")(fn)
    fn = click.option("--embedder", default=None, help="baseline or wire:<command or URL>.")(fn)
    fn = click.option("--no-mask-processing", "mask_processing", flag_value=False, default=None, help="Ablation: skip mask postprocessing.")(fn)
    fn = click.option("--no-clustering", "clustering", flag_value=False, default=None, help="Ablation: one pseudo-cluster of all candidates.")(fn)
    fn = click.option("--no-scaling", "scaling", flag_value=False, default=None, help="Ablation: disable multiscale refinement.")(fn)
    fn = click.option("--spacing", type=int, default=None, help="Seed grid spacing in pixels.")(fn)
    fn = click.option("--seed", type=int, default=None, help="Deterministic seed (default 0).")(fn)
    fn = click.option("--workers", type=int, default=None, help="Image-level parallelism (default 1).")(fn)
    return fn


@click.group()
@click.option("-v", "--verbose", is_flag=True)
def cli(verbose):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


@cli.command()
@click.argument("images", nargs=-1, required=True, type=click.Path())
@common_options
@click.option("--viz", "viz_dir", type=click.Path(), default=None, help="Write per-image visualization PNGs here.")
@click.option("--dump-candidates", "dump_candidates", type=click.Path(), default=None, help="Write candidate masks (RLE JSON) here.")
@click.option("--dump-features", "dump_features_dir", type=click.Path(), default=None, help="Write feature dumps here.")
@click.option("--record", "record_dir", type=click.Path(), default=None, help="Record provider responses for the file provider.")
@click.option("--out", "out_path", type=click.Path(), default=None, help="Write the JSON report here instead of stdout.")
def count(images, profile, config_file, provider, embedder, mask_processing, clustering, scaling, spacing, seed, workers, viz_dir, dump_candidates, dump_features_dir, record_dir, out_path):
    """Count object instances per detected class in each image."""
    cfg = _build_config(profile, config_file, provider, embedder, mask_processing, clustering, scaling, spacing, seed, workers)
    reports = []
    with build_backends(cfg, record_dir=record_dir) as backends:
        for path in images:
            img = load_image(path)
            result = count_image(img, backends.provider, backends.embedder, cfg, image_id=str(path))
            report = result.to_report()
            reports.append(report)
            if viz_dir:
                from .viz import render_clusters

                Path(viz_dir).mkdir(parents=True, exist_ok=True)
                save_png(render_clusters(img, result), Path(viz_dir) / (Path(path).stem + ".png"))
            if dump_candidates:
                Path(dump_candidates).mkdir(parents=True, exist_ok=True)
                payload = [
                    {
                        "id": c.id,
                        "bbox": c.bbox.to_list(),
                        "score": c.score,
                        "rle": rle_encode(c.mask).to_json(),
                    }
                    for c in result.candidates
                ]
                (Path(dump_candidates) / (Path(path).stem + ".json")).write_text(json.dumps(payload))
            if dump_features_dir:
                Path(dump_features_dir).mkdir(parents=True, exist_ok=True)
                dump_features(result.features, Path(dump_features_dir) / Path(path).stem)
    text = json.dumps(reports if len(reports) > 1 else reports[0], indent=2)
    if out_path:
        Path(out_path).write_text(text)
    else:
        click.echo(text)


def fsc_layout_options(fn):
    fn = click.option("--annotation-file", default=None, help="Annotation JSON name inside the root.")(fn)
    fn = click.option("--split-file", default=None, help="Split JSON name inside the root.")(fn)
    fn = click.option("--images-dir", default=None, help="Image directory name inside the root.")(fn)
    fn = click.option("--classes-file", default=None, help="Image-to-class text file name.")(fn)
    return fn


@cli.command("eval")
@click.option("--dataset", "dataset_kind", type=click.Choice(["fsc147", "carpk", "stitched"]), required=True)
@click.option("--root", type=click.Path(), required=True, help="Dataset root directory.")
@click.option("--split", default="test", show_default=True)
@click.option("--max-gt", type=int, default=None, help="Skip images with more ground-truth objects than this.")
@common_options
@fsc_layout_options
@click.option("--out", "out_dir", type=click.Path(), default=None, help="Write report.json and per_image.csv here.")
def eval_cmd(dataset_kind, root, split, max_gt, profile, config_file, provider, embedder, mask_processing, clustering, scaling, spacing, seed, workers, annotation_file, split_file, images_dir, classes_file, out_dir):
    """Evaluate counting quality over a dataset split."""
    cfg = _build_config(profile, config_file, provider, embedder, mask_processing, clustering, scaling, spacing, seed, workers)
    if dataset_kind == "fsc147":
        records = datasets.load_fsc147(
            root, split, annotation_file=annotation_file, split_file=split_file,
            images_dir=images_dir, classes_file=classes_file,
        )
    elif dataset_kind == "carpk":
        records = datasets.load_carpk(root, split)
    else:
        records = datasets.load_stitched(root)
    with build_backends(cfg) as backends:
        outcome = evaluate_records(records, backends.provider, backends.embedder, cfg, max_gt=max_gt)
    payload = {**outcome.report.to_json(), "per_image": outcome.per_image}
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(json.dumps(payload, indent=2))
        with open(out / "per_image.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["image", "class", "gt_count", "pred_count", "abs_err", "tp", "fp", "fn"])
            prf = {p["image"]: p for p in outcome.per_image}
            for unit in outcome.units:
                p = prf[unit.image_id]
                writer.writerow(
                    [
                        unit.image_id,
                        unit.class_label,
                        unit.gt_count,
                        unit.pred_count,
                        abs(unit.pred_count - unit.gt_count),
                        p["tp"],
                        p["fp"],
                        p["fn"],
                    ]
                )
        click.echo(json.dumps(outcome.report.to_json(), indent=2))
    else:
        click.echo(json.dumps(payload, indent=2))


@cli.command()
@click.option("--fsc-root", type=click.Path(), required=True, help="FSC-147 style dataset root for the source pool.")
@click.option("--split", default="test", show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--num-images", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--variant", type=int, default=1, show_default=True)
@fsc_layout_options
def stitch(fsc_root, split, out_dir, num_images, seed, variant, annotation_file, split_file, images_dir, classes_file):
    """Build a synthetic multi-class test set by stitching pool images."""
    pool = datasets.load_fsc147(
        fsc_root, split, annotation_file=annotation_file, split_file=split_file,
        images_dir=images_dir, classes_file=classes_file,
    )
    spec = datasets.StitchSpec(seed=seed, num_images=num_images)
    datasets.write_stitched(spec, pool, out_dir, variant=variant)
    click.echo(f"wrote {num_images} canvases to {out_dir}")


@cli.command()
@click.option("--features", "features_path", type=click.Path(), required=True, help="Feature dump prefix or index JSON.")
@click.option("--schedule", "schedule_text", default="12.0,9.0,7.75", show_default=True)
def cluster(features_path, schedule_text):
    """Cluster a dumped feature set offline."""
    try:
        schedule = ThresholdSchedule.parse(schedule_text)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    features = load_features(features_path)
    clusters = finch_threshold_cluster(features, schedule)
    click.echo(json.dumps([{"members": list(c.members), "size": c.size} for c in clusters]))


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        return EXIT_CONFIG
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.exceptions.Abort:
        return 130
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return EXIT_CONFIG
    except ProviderError as exc:
        click.echo(f"provider error: {exc}", err=True)
        return EXIT_PROVIDER
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        return EXIT_DATA
    except OccamError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
