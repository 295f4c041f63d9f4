"""Command-line interface.

Exit codes: 0 success, 1 domain error (bad data, unreachable backend),
2 usage error.  Subcommands write stage artifacts (responses.jsonl,
verdicts.jsonl, report.json) that chain into each other, so any stage can
be re-run or inspected in isolation.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .backends import (
    ErrorProfile,
    MockVisionBackend,
    OpenAiLlmBackend,
    OracleLlmBackend,
    ScriptedLlmBackend,
)
from .chat_client import ChatCompletionsClient
from .dataset import (
    generate_fixture,
    load_manifest,
    manifest_to_json,
    split_dataset,
    upsample_rare,
)
from .errors import ConfigInvalid, OdalError
from .images import read_ppm, write_ppm
from .judge import JudgeConfig, judge_run
from .labels import label_to_document
from .ontology import load_ontology
from .pipeline import PipelineConfig, read_records, run_pipeline, write_records
from .prompts import render_prompt
from .report import FORMATS, emit_report
from .scoring import (
    DELTA_CLEAN_EMPTY,
    DELTA_LITERAL,
    FineTuneDescriptor,
    RunMeta,
    ScorePolicy,
    aggregate,
    report_from_json,
    report_to_json,
)
from .simnet import (
    load_sim_config,
    compare_scenarios,
    sim_report_to_csv,
    sim_report_to_dict,
    sim_report_to_json,
)
from .transforms import (
    TransformRanges,
    apply_item,
    load_plan,
    plan_augmentations,
    plan_to_json,
)
from .verdicts import read_verdicts, write_verdicts

_ONTOLOGY_OPTION = click.option(
    "--ontology", "ontology_path", type=click.Path(exists=True, dir_okay=False),
    default=None, help="Ontology JSON file (defaults to the packaged one).",
)


@click.group()
@click.version_option(__version__)
def cli() -> None:
    """Split-inference pipeline and evaluation bench for in-cabin detection."""


# ---------------------------------------------------------------- dataset


@cli.group()
def dataset() -> None:
    """Dataset loading, splitting, upsampling, and synthetic fixtures."""


@dataset.command("validate")
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@_ONTOLOGY_OPTION
def dataset_validate(directory: str, ontology_path: str | None) -> None:
    """Check every label in DIRECTORY against the ontology."""
    ontology = load_ontology(ontology_path)
    manifest = load_manifest(directory, ontology)
    n_objects = sum(len(f.objects) for f in manifest.frames)
    n_visible = sum(f.visible_count() for f in manifest.frames)
    click.echo(
        f"ok: {len(manifest.frames)} frames, {n_objects} labeled objects "
        f"({n_visible} visible)"
    )


@dataset.command("split")
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("--fraction", type=float, default=0.8, show_default=True,
              help="Train fraction; train gets floor(N * fraction) frames.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@_ONTOLOGY_OPTION
def dataset_split(
    directory: str, fraction: float, seed: int, out_dir: str, ontology_path: str | None
) -> None:
    """Write seeded train/val manifests (train.json, val.json)."""
    ontology = load_ontology(ontology_path)
    manifest = load_manifest(directory, ontology)
    train, val = split_dataset(manifest, fraction, seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "train.json").write_text(manifest_to_json(train), "utf-8")
    (out / "val.json").write_text(manifest_to_json(val), "utf-8")
    click.echo(f"{len(train.frames)} train / {len(val.frames)} val -> {out}")


@dataset.command("upsample")
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("--min-count", type=int, required=True,
              help="Minimum visible occurrences per represented class.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_file", type=click.Path(dir_okay=False), required=True)
@_ONTOLOGY_OPTION
def dataset_upsample(
    directory: str, min_count: int, seed: int, out_file: str, ontology_path: str | None
) -> None:
    """Duplicate frames holding rare classes; write the manifest JSON."""
    ontology = load_ontology(ontology_path)
    manifest = load_manifest(directory, ontology)
    upsampled = upsample_rare(manifest, min_count, seed)
    Path(out_file).write_text(manifest_to_json(upsampled), "utf-8")
    click.echo(
        f"{len(manifest.frames)} -> {len(upsampled.frames)} frames -> {out_file}"
    )


@dataset.command("fixture")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
@click.option("--frames", "n_frames", type=int, default=50, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@_ONTOLOGY_OPTION
def dataset_fixture(
    out_dir: str, n_frames: int, seed: int, ontology_path: str | None
) -> None:
    """Generate a synthetic labeled dataset with flat-colour images."""
    ontology = load_ontology(ontology_path)
    manifest = generate_fixture(n_frames, ontology, seed, out_dir)
    click.echo(f"wrote {len(manifest.frames)} frames to {out_dir}")


# ---------------------------------------------------------------- augment


@cli.group()
def augment() -> None:
    """Deterministic augmentation planning and application."""


@augment.command("plan")
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("--level", type=click.Choice(["none", "basic", "extensive"]),
              default="basic", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_file", type=click.Path(dir_okay=False), required=True)
@click.option("--ranges", "ranges_file", type=click.Path(exists=True, dir_okay=False),
              default=None, help="JSON file overriding transform sampling ranges.")
@_ONTOLOGY_OPTION
def augment_plan(
    directory: str, level: str, seed: int, out_file: str,
    ranges_file: str | None, ontology_path: str | None,
) -> None:
    """Sample one transform list per frame and write the plan JSON."""
    ontology = load_ontology(ontology_path)
    manifest = load_manifest(directory, ontology)
    ranges = TransformRanges()
    if ranges_file is not None:
        ranges = TransformRanges.from_dict(json.loads(Path(ranges_file).read_text("utf-8")))
    plan = plan_augmentations(manifest, level, seed, ranges)
    Path(out_file).write_text(plan_to_json(plan), "utf-8")
    n_transforms = sum(len(item.transforms) for item in plan.items)
    click.echo(f"planned {n_transforms} transforms over {len(plan.items)} frames")


@augment.command("apply")
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("--plan", "plan_file", type=click.Path(exists=True, dir_okay=False),
              required=True)
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@click.option("--mirror-labels/--no-mirror-labels", default=True, show_default=True,
              help="Rewrite positions through the mirror map on horizontal flips.")
@_ONTOLOGY_OPTION
def augment_apply(
    directory: str, plan_file: str, out_dir: str,
    mirror_labels: bool, ontology_path: str | None,
) -> None:
    """Apply a stored plan, writing augmented images and labels."""
    ontology = load_ontology(ontology_path)
    manifest = load_manifest(directory, ontology)
    frames = manifest.frame_map()
    plan = load_plan(plan_file)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = 0
    for item in plan.items:
        label = frames.get(item.frame_id)
        if label is None:
            raise ConfigInvalid(f"plan names unknown frame {item.frame_id!r}")
        image = read_ppm(label.image_ref)
        new_image, new_label = apply_item(image, label, item, ontology, mirror_labels)
        out_id = f"{item.frame_id}+aug"
        write_ppm(out / f"{out_id}.ppm", new_image)
        (out / f"{out_id}.json").write_text(
            json.dumps(label_to_document(new_label), indent=2) + "\n", "utf-8"
        )
        written += 1
    click.echo(f"wrote {written} augmented frames to {out}")


# ---------------------------------------------------------------- serve


@cli.group()
def serve() -> None:
    """Long-running HTTP services."""


def _build_llm_backend(
    backend: str, dataset_dir: str | None, profile: ErrorProfile, ontology
):
    if backend == "mock":
        return ScriptedLlmBackend(default_text="{}", backend_id="mock-llm")
    if backend == "oracle":
        if dataset_dir is None:
            raise ConfigInvalid("--backend oracle needs --dataset for ground truth")
        manifest = load_manifest(dataset_dir, ontology)
        return OracleLlmBackend(manifest.frame_map(), profile, ontology)
    if backend.startswith("openai:"):
        url = backend.split(":", 1)[1]
        return OpenAiLlmBackend(ChatCompletionsClient(url))
    raise ConfigInvalid(
        f"unknown backend {backend!r}; expected mock, oracle, or openai:URL"
    )


_PROFILE_OPTIONS = (
    click.option("--p-miss", type=float, default=0.0, show_default=True,
                 help="Oracle: drop probability per visible object."),
    click.option("--p-mislocalize", type=float, default=0.0, show_default=True,
                 help="Oracle: probability of moving an object elsewhere."),
    click.option("--p-hallucinate", type=float, default=0.0, show_default=True,
                 help="Oracle: Poisson mean of invented objects per frame."),
)


def _with_profile_options(fn):
    for option in reversed(_PROFILE_OPTIONS):
        fn = option(fn)
    return fn


@serve.command("cloud")
@click.option("--backend", default="mock", show_default=True,
              help="mock, oracle, or openai:URL.")
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True, file_okay=False),
              default=None, help="Ground-truth directory for the oracle backend.")
@_with_profile_options
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--prompt", "prompt_version", type=click.Choice(["v1", "v2"]),
              default="v1", show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8080, show_default=True)
@_ONTOLOGY_OPTION
def serve_cloud(
    backend: str, dataset_dir: str | None, p_miss: float, p_mislocalize: float,
    p_hallucinate: float, seed: int, prompt_version: str,
    host: str, port: int, ontology_path: str | None,
) -> None:
    """Serve POST /v1/infer and GET /v1/health."""
    import uvicorn

    from .service import create_cloud_app

    ontology = load_ontology(ontology_path)
    profile = ErrorProfile(p_miss, p_mislocalize, p_hallucinate, seed)
    llm_backend = _build_llm_backend(backend, dataset_dir, profile, ontology)
    prompt = render_prompt(prompt_version, ontology)
    app = create_cloud_app(llm_backend, prompt)
    uvicorn.run(app, host=host, port=port, log_level="warning")


@serve.command("edge-mock")
@click.option("--tokens", type=int, default=576, show_default=True)
@click.option("--dim", type=int, default=1024, show_default=True)
@click.option("--dtype", type=click.Choice(["f32", "f16", "i8_scaled"]),
              default="f16", show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8081, show_default=True)
def serve_edge_mock(tokens: int, dim: int, dtype: str, host: str, port: int) -> None:
    """Serve POST /v1/encode with the deterministic mock encoder."""
    import uvicorn

    from .service import create_encoder_app

    app = create_encoder_app(MockVisionBackend(tokens, dim, dtype))
    uvicorn.run(app, host=host, port=port, log_level="warning")


# ---------------------------------------------------------------- run


@cli.command("run")
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True, file_okay=False),
              required=True)
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@click.option("--backend", default="oracle", show_default=True,
              help="mock, oracle, or openai:URL.")
@_with_profile_options
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--prompt", "prompt_version", type=click.Choice(["v1", "v2"]),
              default="v1", show_default=True)
@click.option("--mode", type=click.Choice(["loopback", "http"]),
              default="loopback", show_default=True)
@click.option("--cloud-url", default="", help="Cloud base URL for http mode.")
@click.option("--tokens", type=int, default=576, show_default=True,
              help="Mock encoder tokens per frame.")
@click.option("--dim", type=int, default=1024, show_default=True,
              help="Mock encoder embedding width.")
@click.option("--dtype", type=click.Choice(["f32", "f16", "i8_scaled"]),
              default="f16", show_default=True)
@_ONTOLOGY_OPTION
def run_command(
    dataset_dir: str, out_dir: str, backend: str, p_miss: float,
    p_mislocalize: float, p_hallucinate: float, seed: int, prompt_version: str,
    mode: str, cloud_url: str, tokens: int, dim: int, dtype: str,
    ontology_path: str | None,
) -> None:
    """Run the split pipeline over a dataset; write responses.jsonl."""
    ontology = load_ontology(ontology_path)
    manifest = load_manifest(dataset_dir, ontology)
    profile = ErrorProfile(p_miss, p_mislocalize, p_hallucinate, seed)
    cfg = PipelineConfig(
        ontology=ontology,
        vision_backend=MockVisionBackend(tokens, dim, dtype),
        prompt_version=prompt_version,
        mode=mode,
        cloud_url=cloud_url,
    )
    if mode == "loopback":
        cfg.llm_backend = _build_llm_backend(backend, dataset_dir, profile, ontology)
    elif not cloud_url:
        raise ConfigInvalid("http mode needs --cloud-url")
    records = run_pipeline(manifest, cfg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_records(out / "responses.jsonl", records)
    run_manifest = {
        "dataset": str(dataset_dir),
        "frames": len(records),
        "errors": sum(1 for r in records if r.error),
        "backend": backend,
        "mode": mode,
        "prompt_version": prompt_version,
        "profile": {
            "p_miss": p_miss, "p_mislocalize": p_mislocalize,
            "p_hallucinate": p_hallucinate, "seed": seed,
        },
        "encoder": {"tokens": tokens, "dim": dim, "dtype": dtype},
        "ontology_checksum": ontology.checksum,
        "artifacts": {"responses": "responses.jsonl"},
    }
    (out / "run_manifest.json").write_text(
        json.dumps(run_manifest, sort_keys=True, indent=2) + "\n", "utf-8"
    )
    n_errors = run_manifest["errors"]
    click.echo(f"{len(records)} frames ({n_errors} errors) -> {out / 'responses.jsonl'}")


# ---------------------------------------------------------------- judge


@cli.command("judge")
@click.option("--responses", "responses_file",
              type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True, file_okay=False),
              required=True)
@click.option("--out", "out_file", type=click.Path(dir_okay=False), required=True)
@click.option("--kind", type=click.Choice(["rules", "llm"]), default="rules",
              show_default=True)
@click.option("--endpoint", default="", help="Judge chat endpoint for --kind llm.")
@click.option("--model", default="judge", show_default=True)
@click.option("--parallel", type=int, default=4, show_default=True,
              help="In-flight bound for llm judging.")
@click.option("--neutral-invisible/--hallucinate-invisible", default=True,
              show_default=True,
              help="How to count detections of labeled-but-invisible objects.")
@_ONTOLOGY_OPTION
def judge_command(
    responses_file: str, dataset_dir: str, out_file: str, kind: str,
    endpoint: str, model: str, parallel: int, neutral_invisible: bool,
    ontology_path: str | None,
) -> None:
    """Judge recorded responses against ground truth; write verdicts.jsonl."""
    ontology = load_ontology(ontology_path)
    manifest = load_manifest(dataset_dir, ontology)
    labels = manifest.frame_map()
    records = list(read_records(responses_file))
    missing = [r.frame_id for r in records if r.frame_id not in labels]
    if missing:
        raise ConfigInvalid(f"no ground truth for frames: {missing[:5]}")
    if kind == "llm" and not endpoint:
        raise ConfigInvalid("--kind llm needs --endpoint")
    cfg = JudgeConfig(
        kind=kind,
        llm_endpoint=endpoint,
        model=model,
        parallelism_bound=parallel,
        invisible_neutral=neutral_invisible,
    )
    verdicts = judge_run(
        [(r.frame_id, r.text) for r in records], labels, cfg, ontology
    )
    write_verdicts(out_file, verdicts)
    click.echo(f"judged {len(verdicts)} frames -> {out_file}")


# ---------------------------------------------------------------- score


@cli.command("score")
@click.option("--verdicts", "verdicts_file",
              type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", "out_file", type=click.Path(dir_okay=False), required=True)
@click.option("--policy", type=click.Choice([DELTA_LITERAL, DELTA_CLEAN_EMPTY]),
              default=DELTA_LITERAL, show_default=True,
              help="When the no-correct-detection bonus point applies.")
@click.option("--clamp", is_flag=True, help="Floor per-frame scores at zero.")
@click.option("--prompt-version", default="", help="Run metadata for reports.")
@click.option("--backend-id", default="", help="Run metadata for reports.")
@click.option("--label", default="", help="Run label shown in reports.")
@click.option("--ft-vision-encoder", is_flag=True,
              help="Metadata: vision encoder was fine-tuned.")
@click.option("--ft-comprehensive", is_flag=True,
              help="Metadata: all linear layers were fine-tuned.")
def score_command(
    verdicts_file: str, out_file: str, policy: str, clamp: bool,
    prompt_version: str, backend_id: str, label: str,
    ft_vision_encoder: bool, ft_comprehensive: bool,
) -> None:
    """Aggregate verdicts into a report.json (deterministic bytes)."""
    verdicts = list(read_verdicts(verdicts_file))
    report = aggregate(
        verdicts,
        ScorePolicy(delta_rule=policy, clamp_frame_at_zero=clamp),
        RunMeta(
            prompt_version=prompt_version,
            backend_id=backend_id,
            label=label,
            fine_tune=FineTuneDescriptor(ft_vision_encoder, ft_comprehensive),
        ),
    )
    Path(out_file).write_text(report_to_json(report), "utf-8")
    click.echo(
        f"score {float(report.odal_score_pct):.2f}% | "
        f"snr {report.odal_snr.render(2)} | "
        f"strict json {float(report.json_rate_strict_pct):.2f}% -> {out_file}"
    )


# ---------------------------------------------------------------- report


@cli.command("report")
@click.argument("report_files", nargs=-1, required=True,
                type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(list(FORMATS)), default="table",
              show_default=True)
@click.option("--out", "out_file", type=click.Path(dir_okay=False), default=None,
              help="Write here instead of stdout.")
@click.option("--figures-dir", type=click.Path(file_okay=False), default=None,
              help="Also render comparison charts into this directory.")
def report_command(
    report_files: tuple[str, ...], fmt: str, out_file: str | None,
    figures_dir: str | None,
) -> None:
    """Render one or more report.json files, sorted by descending SNR."""
    reports = [report_from_json(Path(p).read_text("utf-8")) for p in report_files]
    rendered = emit_report(reports, fmt)
    if out_file is not None:
        Path(out_file).write_text(rendered, "utf-8")
        click.echo(f"wrote {fmt} report -> {out_file}")
    else:
        click.echo(rendered, nl=False)
    if figures_dir is not None:
        from .figures import (
            render_json_rate_figure,
            render_score_figure,
            render_snr_figure,
        )

        figures = Path(figures_dir)
        figures.mkdir(parents=True, exist_ok=True)
        ordered = sorted(reports, key=lambda r: r.odal_snr.sort_value(), reverse=True)
        written = [
            render_score_figure(ordered, figures / "odal_score.png"),
            render_snr_figure(ordered, figures / "odal_snr.png"),
            render_json_rate_figure(ordered, figures / "json_rate.png"),
        ]
        click.echo("figures: " + ", ".join(str(p) for p in written))


# ---------------------------------------------------------------- simulate


@cli.command("simulate")
@click.option("--config", "config_file", type=click.Path(exists=True, dir_okay=False),
              required=True, help="Scenario JSON (link/compute/image/embedding).")
@click.option("--frames", "n_frames", type=int, default=None,
              help="Simulate this many synthetic frame ids.")
@click.option("--dataset", "dataset_dir", type=click.Path(exists=True, file_okay=False),
              default=None, help="Take frame ids from this dataset instead.")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json",
              show_default=True)
@click.option("--out", "out_file", type=click.Path(dir_okay=False), default=None)
@click.option("--figures-dir", type=click.Path(file_okay=False), default=None)
@_ONTOLOGY_OPTION
def simulate_command(
    config_file: str, n_frames: int | None, dataset_dir: str | None, fmt: str,
    out_file: str | None, figures_dir: str | None, ontology_path: str | None,
) -> None:
    """Compare raw-upload, embedding-upload, and on-board scenarios."""
    link, compute, image, embedding = load_sim_config(config_file)
    if dataset_dir is not None:
        ontology = load_ontology(ontology_path)
        manifest = load_manifest(dataset_dir, ontology)
        frame_ids = [f.frame_id for f in manifest.frames]
    elif n_frames is not None:
        frame_ids = [f"frame{i:05d}" for i in range(n_frames)]
    else:
        raise ConfigInvalid("need --frames or --dataset")
    sim = compare_scenarios(frame_ids, link, compute, image, embedding)
    rendered = sim_report_to_json(sim) if fmt == "json" else sim_report_to_csv(sim)
    if out_file is not None:
        Path(out_file).write_text(rendered, "utf-8")
        click.echo(f"wrote {fmt} simulation report -> {out_file}")
    else:
        click.echo(rendered, nl=False)
    if figures_dir is not None:
        from .figures import render_latency_figure, render_uplink_figure

        figures = Path(figures_dir)
        figures.mkdir(parents=True, exist_ok=True)
        stats = sim_report_to_dict(sim)["scenarios"]
        written = [
            render_latency_figure(stats, figures / "latency.png"),
            render_uplink_figure(stats, figures / "uplink.png"),
        ]
        click.echo("figures: " + ", ".join(str(p) for p in written))


def main() -> None:
    try:
        cli(standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(130)
    except click.UsageError as exc:
        exc.show()
        sys.exit(2)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except click.exceptions.Exit as exc:
        sys.exit(exc.exit_code)
    except OdalError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    sys.exit(0)


if __name__ == "__main__":
    main()
