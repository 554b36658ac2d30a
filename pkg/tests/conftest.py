from __future__ import annotations

import json
from pathlib import Path

import pytest

from ukil.corpus import Act, Section


def _configure_deterministic_kernels() -> None:
    # This host's multi-threaded CPU matmuls are not call-to-call
    # deterministic (parallel reduction order drifts by ~1e-6 under load).
    # Bit-identity checks require deterministic kernels; on CPU that means
    # single-threaded execution.
    import torch

    torch.set_num_threads(1)


_configure_deterministic_kernels()

TOYBASE_CACHE_VERSION = "v1"


def tiny_lm(vocab_size: int = 101, n_embd: int = 32, n_layer: int = 2,
            n_head: int = 2, n_positions: int = 128, seed: int = 0):
    """Small random GPT-2 for unit tests; no pretraining."""
    import torch
    from transformers import GPT2Config, GPT2LMHeadModel

    torch.manual_seed(seed)
    config = GPT2Config(vocab_size=vocab_size, n_positions=n_positions,
                        n_embd=n_embd, n_layer=n_layer, n_head=n_head,
                        bos_token_id=0, eos_token_id=0)
    model = GPT2LMHeadModel(config)
    model.eval()
    return model


@pytest.fixture(scope="session")
def toy_base_dir(tmp_path_factory) -> Path:
    """Pretrained toy base, built once and cached under tests/.cache."""
    from ukil.toybase import (DEFAULT_PRETRAIN_STEPS, build_toy_tokenizer,
                              pretrain_toy_base, save_toy_base)

    cache = Path(__file__).parent / ".cache" / f"toybase-{TOYBASE_CACHE_VERSION}"
    marker = cache / "pretrain_meta.json"
    if marker.exists():
        return cache
    model, tokenizer = pretrain_toy_base(build_toy_tokenizer(),
                                         steps=DEFAULT_PRETRAIN_STEPS)
    save_toy_base(model, tokenizer, cache)
    marker.write_text(json.dumps({"steps": DEFAULT_PRETRAIN_STEPS}))
    return cache


def make_section(section_id: int, act_id: int, name: str = "", details: str = "",
                 related_acts: list[int] | None = None) -> Section:
    return Section(
        section_id=section_id,
        name=name or f"Section {section_id}",
        details=details or f"Details of section {section_id} in act {act_id}.",
        related_acts=related_acts or [],
        act_id=act_id,
    )


def make_act(act_id: int, name: str = "", n_sections: int = 2,
             repelled: bool = False, related_act: list[int] | None = None) -> Act:
    sections = [make_section(i + 1, act_id) for i in range(n_sections)]
    return Act(
        id=act_id,
        name=name or f"The Fixture Act No {act_id}, {1900 + act_id}",
        repelled=repelled,
        text=f"An Act to provide fixtures, number {act_id}.",
        published_date=f"{1900 + act_id}-01-01",
        related_act=related_act or [],
        lower_text=[f"Footnote for act {act_id}"],
        num_of_sections=len(sections),
        sections=sections,
    )


@pytest.fixture
def two_act_corpus() -> list[Act]:
    return [make_act(1, n_sections=3), make_act(2, n_sections=5)]


PENSIONS_ACT_HTML = """<!DOCTYPE html>
<html><head><title>The Pensions Act, 1871</title></head>
<body>
<div id="act-details" data-act-id="31">
  <h1 class="act-title">The Pensions Act, 1871</h1>
  <p class="act-meta">Published: 1871-08-08</p>
  <div class="act-text">An Act to consolidate and amend the law relating to pensions
    and grants by Government of money or land-revenue.</div>
  <p class="lower-text">Throughout this Act the word "Government" was substituted.</p>
  <a class="related-act" data-act-id="12">The Code of Civil Procedure</a>
  <div class="section" data-section-id="1">
    <h3 class="section-title">Short title</h3>
    <div class="section-body">This Act may be called the Pensions Act, 1871.</div>
  </div>
  <div class="section" data-section-id="2">
    <h3 class="section-title">Power to make rules</h3>
    <div class="section-body">The appropriate Government may, from time to time,
      make rules consistent with this Act.</div>
    <a class="related-act" data-act-id="12">related</a>
  </div>
</div>
</body></html>
"""

ACCOUNTANTS_ACT_HTML = """<!DOCTYPE html>
<html><head><title>The Public Accountants Default Act</title></head>
<body>
<div id="act-details" data-act-id="2">
  <h1 class="act-title">The Public Accountants Defaults Act, 1850</h1>
  <div class="act-text">An Act for making good defaults of public accountants.</div>
  <div class="section" data-section-id="1">
    <h3 class="section-title">Public Accountants to give security</h3>
    <div class="section-body">Every public accountant shall give security for the due
      discharge of the trusts of his office, and for the due account of all moneys which
      shall come into his possession or control, by reason of his office.</div>
  </div>
  <div class="section" data-section-id="2">
    <h3 class="section-title">Amount and kind of security</h3>
    <div class="section-body">In default of any Act having special reference to the office
      of any public accountant, the security given shall be of such amount and kind as
      shall be required by any rules made from time to time.</div>
  </div>
</div>
</body></html>
"""

REPEALED_ACT_HTML = """<html><body>
<div id="act-details" data-act-id="7" data-repealed="true">
  <h1 class="act-title">The Obsolete Provisions Act, 1901</h1>
  <div class="act-text">An Act since repealed.</div>
  <div class="section" data-section-id="1">
    <h3 class="section-title">Sole section</h3>
    <div class="section-body">This provision is no longer in force.</div>
  </div>
</div>
</body></html>
"""
