"""Operator command line: ingest, query, extract, ablate, serve.

Exit codes: 0 success, 2 usage or input error, 3 dependency failure
(embedding endpoint, sidecar, frame tool), 4 data corruption.  Non-JSON
output carries no timestamps so runs are byte-reproducible.
"""

from __future__ import annotations

import functools
import json
import os
import sys
from typing import Optional

import click

import mpve
from mpve import ablation as ablation_mod
from mpve import index as index_mod
from mpve.embedding import (
    CacheFormatError,
    EmptyText,
    ProviderConfig,
    ProviderUnreachable,
    build_provider,
)
from mpve.keyframes import (
    ExtractorConfig,
    FrameAccessorFailure,
    ImageDirAccessor,
    NoDetections,
    PriorPackage,
    SegmentTooShort,
    VideoMeta,
    detections_from_json,
    export_package,
    match_reference_units,
    now_iso,
    plan_keyframes,
    segment_detections,
)
from mpve.matching import MatchConfig, retrieve
from mpve.parsing import CyclicTree, MalformedConllu
from mpve.semantic import DimensionMismatch, PromptSemantics
from mpve.vectorizer import vectorize

SIDECAR_ENV_VAR = "MPVE_SIDECAR"

_USAGE_ERRORS = (
    index_mod.ManifestSyntax,
    index_mod.DuplicateId,
    index_mod.EmptyIndex,
    MalformedConllu,
    CyclicTree,
    EmptyText,
    DimensionMismatch,
    ablation_mod.EmptyPromptList,
    ValueError,
    FileNotFoundError,
    IsADirectoryError,
)
_DEPENDENCY_ERRORS = (ProviderUnreachable, FrameAccessorFailure)
_CORRUPTION_ERRORS = (
    index_mod.CorruptFile,
    index_mod.FormatVersionMismatch,
    CacheFormatError,
)


def engine_errors(fn):
    """Translate engine exceptions into the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _CORRUPTION_ERRORS as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(4)
        except _DEPENDENCY_ERRORS as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)
        except _USAGE_ERRORS as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)

    return wrapper


def provider_options(fn):
    fn = click.option("--provider", "provider_mode", type=click.Choice(["mock", "remote"]),
                      default="mock", show_default=True, help="Embedding source.")(fn)
    fn = click.option("--endpoint", default=None,
                      help="Embedding endpoint URL (remote mode; MPVE_EMBED_ENDPOINT overrides).")(fn)
    fn = click.option("--cache", "cache_path", default=None, type=click.Path(),
                      help="Vector cache file (wraps the provider).")(fn)
    return fn


def prompt_source_options(fn):
    fn = click.option("--parses", "parses_path", default=None,
                      type=click.Path(exists=True, dir_okay=False),
                      help="CoNLL-U file with parses for prompts/captions.")(fn)
    fn = click.option("--sidecar", "sidecar_url", default=None,
                      help=f"NLP sidecar base URL (or {SIDECAR_ENV_VAR}).")(fn)
    return fn


def _make_provider(provider_mode: str, endpoint: Optional[str], cache_path: Optional[str],
                   dim: int):
    mode = provider_mode if not cache_path else f"cached-{provider_mode}"
    cfg = ProviderConfig(mode=mode, endpoint=endpoint, dim=dim, cache_path=cache_path)
    return build_provider(cfg)


def _resolve_sidecar(sidecar_url: Optional[str]) -> Optional[str]:
    return sidecar_url or os.environ.get(SIDECAR_ENV_VAR)


def _parse_source(parses_path: Optional[str], sidecar_url: Optional[str]):
    sidecar = _resolve_sidecar(sidecar_url)
    if sidecar:
        return index_mod.SidecarParseSource(sidecar)
    if parses_path:
        return index_mod.FileParseSource.from_path(parses_path)
    return None


def _prompt_vectorizer(provider, parses_path, sidecar_url, quiet=False):
    """Callable turning prompt text into semantics via the best parse source."""
    source = _parse_source(parses_path, sidecar_url)

    def vectorize_prompt(text: str) -> PromptSemantics:
        sentences = None
        if source is not None:
            sentences = source.parses_for("", text)
        if not sentences:
            if not quiet:
                click.echo(
                    "note: no parse available for the prompt; matching on the "
                    "sentence vector only",
                    err=True,
                )
            sentences = []
        return vectorize(text, sentences, provider)

    return vectorize_prompt


def _warn_fingerprint(idx, provider) -> None:
    if provider.fingerprint() != idx.provider_fingerprint:
        click.echo(
            f"warning: index built with provider {idx.provider_fingerprint!r}, "
            f"querying with {provider.fingerprint()!r}",
            err=True,
        )


def _match_config(path: Optional[str], top_k: Optional[int] = None) -> MatchConfig:
    cfg = MatchConfig() if not path else MatchConfig.from_json(open(path).read())
    if top_k is not None:
        from dataclasses import replace

        cfg = replace(cfg, top_k=top_k)
    return cfg


@click.group()
@click.version_option(version=mpve.__version__, prog_name="mpve")
def main():
    """Motion-prior video engine: caption search and keyframe packaging."""


@main.command("ingest")
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--dim", default=384, show_default=True, type=int)
@click.option("--force", is_flag=True, help="Overwrite an existing index file.")
@provider_options
@prompt_source_options
@engine_errors
def cmd_ingest(manifest, out_path, dim, force, provider_mode, endpoint, cache_path,
               parses_path, sidecar_url):
    """Build a searchable index from a JSON-lines manifest."""
    if os.path.exists(out_path) and not force:
        click.echo(f"error: {out_path} exists (use --force to overwrite)", err=True)
        sys.exit(2)
    provider = _make_provider(provider_mode, endpoint, cache_path, dim)
    source = _parse_source(parses_path, sidecar_url)
    with open(manifest, "r", encoding="utf-8") as fh:
        idx = index_mod.ingest(fh, provider, source)
    index_mod.save(idx, out_path)
    if hasattr(provider, "close"):
        provider.close()
    click.echo(f"{len(idx)} entries")
    click.echo(f"dim {idx.dim}")
    click.echo(f"fingerprint {idx.provider_fingerprint}")
    click.echo(f"saved {out_path}")


def _print_matches(idx, matches, explain):
    for rank, m in enumerate(matches, start=1):
        entry = idx.get(m.entry_id)
        click.echo(f"{rank}. {m.entry_id}  score={m.score:.6f}  {entry.video_ref}")
        click.echo(f"   caption: {entry.caption}")
        if explain:
            p = m.parts
            click.echo(
                f"   total={p.total_sim:.6f} core_motion={p.core_mot_sim:.6f} "
                f"core_actor={p.core_atr_sim:.6f} unit_set={p.unit_set_sim:.6f} "
                f"rounds_survived={m.survived_rounds}"
            )


@main.command("query")
@click.option("--index", "index_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--prompt", required=True)
@click.option("--top-k", default=1, show_default=True, type=int)
@click.option("--json", "as_json", is_flag=True, help="Emit a machine-readable array.")
@click.option("--explain", is_flag=True, help="Show the score decomposition per result.")
@click.option("--match-config", "match_config_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
@provider_options
@prompt_source_options
@engine_errors
def cmd_query(index_path, prompt, top_k, as_json, explain, match_config_path,
              provider_mode, endpoint, cache_path, parses_path, sidecar_url):
    """Rank corpus entries against a prompt."""
    idx = index_mod.load(index_path)
    provider = _make_provider(provider_mode, endpoint, cache_path, idx.dim)
    _warn_fingerprint(idx, provider)
    cfg = _match_config(match_config_path, top_k=top_k)
    sem = _prompt_vectorizer(provider, parses_path, sidecar_url, quiet=as_json)(prompt)
    matches = retrieve(sem, idx, cfg)
    if as_json:
        click.echo(json.dumps([m.to_json_dict() for m in matches], indent=2))
    else:
        _print_matches(idx, matches, explain)


def _fetch_detections_from_sidecar(sidecar: str, video_ref: str, captions, stride: int):
    import requests

    try:
        resp = requests.post(
            f"{sidecar.rstrip('/')}/detect",
            json={"video_ref": video_ref, "captions": list(captions), "stride": stride},
            timeout=120,
        )
    except requests.RequestException as exc:
        raise ProviderUnreachable(f"detect endpoint {sidecar}: {exc}") from exc
    if resp.status_code != 200:
        raise ProviderUnreachable(f"detect endpoint returned HTTP {resp.status_code}")
    return detections_from_json(resp.text)


def _video_meta(meta_path: Optional[str], accessor, entry) -> VideoMeta:
    if meta_path:
        data = json.loads(open(meta_path, encoding="utf-8").read())
        return VideoMeta(
            frame_count=int(data["frame_count"]),
            width=int(data["width"]),
            height=int(data["height"]),
            fps=data.get("fps"),
        )
    if accessor is not None:
        return accessor.probe_meta(fps=entry.fps)
    raise ValueError(
        "video geometry unknown: pass --meta FILE or use a frame-directory video_ref"
    )


@main.command("extract")
@click.option("--index", "index_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--prompt", required=True)
@click.option("--detections", "detections_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Detection fixture JSON (alternative to --sidecar).")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--n", "n_frames", default=None, type=int, help="Keyframe count.")
@click.option("--meta", "meta_path", default=None, type=click.Path(exists=True, dir_okay=False),
              help="Video meta JSON {frame_count,width,height,fps}.")
@click.option("--stride", default=1, show_default=True, type=int,
              help="Frame stride for sidecar detection.")
@click.option("--match-config", "match_config_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--extractor-config", "extractor_config_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
@provider_options
@prompt_source_options
@engine_errors
def cmd_extract(index_path, prompt, detections_path, out_dir, n_frames, meta_path, stride,
                match_config_path, extractor_config_path, provider_mode, endpoint,
                cache_path, parses_path, sidecar_url):
    """Retrieve the best entry and export its motion-prior package."""
    sidecar = _resolve_sidecar(sidecar_url)
    if detections_path is None and sidecar is None:
        click.echo("error: need --detections FILE or --sidecar URL", err=True)
        sys.exit(2)

    idx = index_mod.load(index_path)
    provider = _make_provider(provider_mode, endpoint, cache_path, idx.dim)
    _warn_fingerprint(idx, provider)
    ext_cfg = (
        ExtractorConfig()
        if not extractor_config_path
        else ExtractorConfig.from_json(open(extractor_config_path).read())
    )
    n = n_frames if n_frames is not None else ext_cfg.n_frames

    sem = _prompt_vectorizer(provider, parses_path, sidecar_url)(prompt)
    match = retrieve(sem, idx, _match_config(match_config_path))[0]
    entry = idx.get(match.entry_id)

    matched = match_reference_units(entry.semantics.units, sem.units, ext_cfg.tau_unit)
    captions = tuple(m.caption for m in matched) or (entry.caption,)
    if not matched:
        click.echo("note: no caption unit matched the prompt; detecting on the "
                   "full caption", err=True)

    if detections_path:
        detections = detections_from_json(open(detections_path, encoding="utf-8").read())
    else:
        detections = _fetch_detections_from_sidecar(sidecar, entry.video_ref, captions, stride)

    accessor = None
    if os.path.isdir(entry.video_ref):
        accessor = ImageDirAccessor(entry.video_ref)
    meta = _video_meta(meta_path, accessor, entry)

    try:
        segment, crop = segment_detections(detections, meta, ext_cfg)
    except NoDetections:
        click.echo("warning: no usable detections; falling back to the full "
                   "frame and full video", err=True)
        segment, crop = (0, meta.frame_count - 1), (0, 0, meta.width, meta.height)

    try:
        spec = plan_keyframes(segment, crop, meta, n, video_ref=entry.video_ref)
    except SegmentTooShort as exc:
        click.echo(f"warning: segment holds only {exc.length} frames; reducing "
                   f"n from {n}", err=True)
        spec = plan_keyframes(segment, crop, meta, exc.length, video_ref=entry.video_ref)

    package = PriorPackage(
        prompt=prompt,
        match=match,
        matched_captions=captions,
        keyframes=spec,
        created_at=now_iso(),
        engine_version=mpve.__version__,
    )
    path = export_package(package, out_dir, accessor=accessor, extractor_cfg=ext_cfg)
    click.echo(f"package {path}")


@main.command("ablate")
@click.option("--index", "index_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--prompts", "prompts_path", default=None,
              type=click.Path(exists=True, dir_okay=False),
              help="Prompt list, one per line (defaults to the packaged set).")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", "out_csv", required=True, type=click.Path())
@click.option("--fractions", default=None,
              help="Comma-separated fractions, descending (default 1,.5,.25,.1,.05,.01).")
@click.option("--match-config", "match_config_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
@provider_options
@prompt_source_options
@engine_errors
def cmd_ablate(index_path, prompts_path, seed, out_csv, fractions, match_config_path,
               provider_mode, endpoint, cache_path, parses_path, sidecar_url):
    """Top-1 score vs corpus fraction, written as CSV."""
    idx = index_mod.load(index_path)
    provider = _make_provider(provider_mode, endpoint, cache_path, idx.dim)
    _warn_fingerprint(idx, provider)
    if prompts_path:
        with open(prompts_path, encoding="utf-8") as fh:
            prompts = tuple(line.strip() for line in fh if line.strip())
    else:
        prompts = tuple(ablation_mod.default_prompts())
    cfg = ablation_mod.AblationConfig(
        fractions=tuple(float(f) for f in fractions.split(",")) if fractions
        else ablation_mod.DEFAULT_FRACTIONS,
        seed=seed,
        prompts=prompts,
        match=_match_config(match_config_path),
    )
    vec_prompt = _prompt_vectorizer(provider, parses_path, sidecar_url, quiet=True)
    result = ablation_mod.run_ablation(idx, cfg, vec_prompt)
    with open(out_csv, "w", encoding="utf-8") as fh:
        fh.write(result.to_csv())
    click.echo("fraction  average_top1_score")
    for fraction, avg in result.averages().items():
        click.echo(f"{fraction:<8g}  {avg:.6f}")
    click.echo(f"csv {out_csv}")


@main.command("serve")
@click.option("--index", "index_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--listen", default="127.0.0.1:8080", show_default=True)
@click.option("--match-config", "match_config_path", default=None,
              type=click.Path(exists=True, dir_okay=False))
@provider_options
@prompt_source_options
@engine_errors
def cmd_serve(index_path, listen, match_config_path, provider_mode, endpoint, cache_path,
              parses_path, sidecar_url):
    """Serve /health, /search and /vectorize over HTTP."""
    from mpve.server import serve_forever

    idx = index_mod.load(index_path)  # fail fast on corrupt files
    provider = _make_provider(provider_mode, endpoint, cache_path, idx.dim)
    _warn_fingerprint(idx, provider)
    vec_prompt = _prompt_vectorizer(provider, parses_path, sidecar_url, quiet=True)
    serve_forever(
        listen,
        load_index=lambda: idx,
        vectorize_prompt=vec_prompt,
        match_cfg=_match_config(match_config_path),
    )


if __name__ == "__main__":
    main()
