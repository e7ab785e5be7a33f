#!/usr/bin/env python3
"""Independent greedy-path enumeration for the fusion testbed.

Re-derives, without touching the C++ code, the greedy token sequences that
the decoder must produce on tests/data/testbed_*.toy. The printed values are
frozen into tests/test_decoder.cpp and tests/acceptance.cpp.

Run: python3 tests/oracles/testbed_oracle.py
"""
import math
import pathlib

DATA = pathlib.Path(__file__).resolve().parent.parent / "data"


def load(path):
    vocab, base, omni, section = [], {}, {}, None
    for raw in path.read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("@vocab"):
            vocab += line.split()[1:]
            continue
        if line.startswith("@context_limit"):
            continue
        if line.startswith("@omni"):
            section = line.split()[1]
            omni.setdefault(section, {})
            continue
        ctx, nxt, score = [f.strip() for f in line.split("|")]
        table = base if section is None else omni[section]
        table.setdefault(tuple(ctx.split()), {})[nxt] = float(score)
    return vocab, base, omni


def longest(table, prefix):
    for n in range(len(prefix), -1, -1):
        key = tuple(prefix[len(prefix) - n:])
        if key in table:
            return table[key]
    return None


def logits(model, prefix, key=None):
    vocab, base, omni = model
    z = [0.0] * len(vocab)
    row = longest(base, prefix)
    if row:
        for tok, s in row.items():
            z[vocab.index(tok)] = s
    if key is not None and key in omni:
        row = longest(omni[key], prefix)
        if row:
            for tok, s in row.items():
                z[vocab.index(tok)] = s
    return z


def softmax(z):
    m = max(z)
    e = [math.exp(v - m) for v in z]
    s = sum(e)
    return [v / s for v in e]


def js(p, q):
    total = 0.0
    for a, b in zip(p, q):
        m = 0.5 * (a + b)
        if a > 0:
            total += 0.5 * a * math.log(a / m)
        if b > 0:
            total += 0.5 * b * math.log(b / m)
    return total


def penalize(z, history, penalty=1.03):
    z = list(z)
    for tok in set(history):
        z[tok] = z[tok] / penalty if z[tok] > 0 else z[tok] * penalty
    return z


def argmax(z):
    best = 0
    for i, v in enumerate(z):
        if v > z[best]:
            best = i
    return best


def run(base, guide, prompt, key, strategy, think=("<think>",), max_new=8):
    vocab = base[0]
    ids = [vocab.index(t) for t in prompt]
    gen, alphas = [], []
    for t in range(1, max_new + 1):
        toks = prompt + [vocab[i] for i in gen]
        zb = logits(base, toks, key)
        if strategy == "none":
            fused = zb
        else:
            zn = logits(base, toks)
            zr = logits(guide, list(prompt) + list(think) + [vocab[i] for i in gen])
            dr = js(softmax(zr), softmax(zn))
            dp = js(softmax(zb), softmax(zn))
            a = min(max(dr - dp, 0.0), 1.0)
            if t <= 5:
                a = min(a, 0.1 * t)
            alphas.append(a)
            fused = [(2 - a) * b + a * r - n for b, r, n in zip(zb, zr, zn)]
        tok = argmax(penalize(fused, ids + gen))
        gen.append(tok)
        if vocab[tok] == "EOS":
            break
    return [vocab[i] for i in gen], alphas


def main():
    base = load(DATA / "testbed_base.toy")
    guide = load(DATA / "testbed_guide.toy")
    for color in ("red", "green", "blue"):
        seq, alphas = run(base, guide, ["Q"], color, "stepwise")
        print(f"stepwise   {color:5s} {' '.join(seq):28s} alpha_r={['%.6f' % a for a in alphas]}")
        seq, _ = run(base, guide, ["Q"], color, "none")
        print(f"base-only  {color:5s} {' '.join(seq)}")
    seq, _ = run(guide, guide, ["Q", "<think>"], None, "none")
    print(f"guide-only       {' '.join(seq)}")
    for color in ("red", "green", "blue"):
        for cap_prompt in ("describe", "describe_shape"):
            caption, _ = run(base, guide, [cap_prompt], color, "none")
            words = [w for w in caption if w != "EOS"]
            answer, _ = run(guide, guide, words + ["Q", "<think>"], None, "none")
            print(f"caption    {color:5s} {cap_prompt:15s} caption={' '.join(caption):12s} answer={' '.join(answer)}")


if __name__ == "__main__":
    main()
