# SPDX-License-Identifier: Apache-2.0
"""Generate benchmark model description files (JSON).

Emits the CNN stacks (ResNet-50/101/152, DenseNet-121/169/201,
Inception-v3) at several square input resolutions and the BERT family
(mini/small/medium/base/large) at several sequence lengths.

Convolutions carry full spatial geometry; attention and feed-forward
blocks are pre-lowered to matmul/dense layers (attention score and
context products fold the head dimension into the batch).
"""

import argparse
import json
import os


def conv(lid, in_hw, in_c, out_c, k, stride=1, padding="same",
         activation=True, preds=None, kw=None):
    return {
        "id": lid,
        "kind": "conv2d",
        "in_h": in_hw,
        "in_w": in_hw,
        "in_c": in_c,
        "kernel_h": k,
        "kernel_w": kw if kw is not None else k,
        "out_c": out_c,
        "stride": stride,
        "padding": padding,
        "activation": activation,
        "predecessors": preds if preds is not None else [],
    }


def dense(lid, in_features, out_features, seq_len=1, activation=True,
          preds=None):
    return {
        "id": lid,
        "kind": "dense",
        "in_features": in_features,
        "out_features": out_features,
        "seq_len": seq_len,
        "activation": activation,
        "predecessors": preds if preds is not None else [],
    }


def out_hw(hw, stride, padding, k):
    if padding == "same":
        return (hw + stride - 1) // stride
    return (hw - k) // stride + 1


# ---------------------------------------------------------------------
# ResNet
# ---------------------------------------------------------------------

RESNET_BLOCKS = {
    50: [3, 4, 6, 3],
    101: [3, 4, 23, 3],
    152: [3, 8, 36, 3],
}


def resnet(depth, input_hw):
    blocks = RESNET_BLOCKS[depth]
    layers = []

    def add(layer):
        layers.append(layer)
        return len(layers) - 1

    prev = add(conv("stem", input_hw, 3, 64, 7, stride=2))
    hw = out_hw(input_hw, 2, "same", 7)
    hw = (hw + 1) // 2  # 3x3/2 max pool
    in_c = 64
    for stage, n_blocks in enumerate(blocks):
        width = 64 * (2 ** stage)
        out_c = width * 4
        for b in range(n_blocks):
            stride = 2 if (stage > 0 and b == 0) else 1
            tag = f"s{stage + 1}b{b + 1}"
            c1 = add(conv(f"{tag}_c1", hw, in_c, width, 1, stride=stride,
                          preds=[prev]))
            hw_b = out_hw(hw, stride, "same", 1)
            c2 = add(conv(f"{tag}_c2", hw_b, width, width, 3, preds=[c1]))
            # the residual join rides on the block's last conv: projection
            # shortcut on the first block of a stage, identity afterwards
            if b == 0:
                sc = add(conv(f"{tag}_sc", hw, in_c, out_c, 1, stride=stride,
                              activation=False, preds=[prev]))
                res = sc
            else:
                res = prev
            c3 = add(conv(f"{tag}_c3", hw_b, width, out_c, 1,
                          preds=[c2, res]))
            prev = c3
            hw = hw_b
            in_c = out_c
    add(dense("fc", in_c, 1000, activation=False, preds=[prev]))
    return layers


# ---------------------------------------------------------------------
# DenseNet (growth rate 32, BC blocks)
# ---------------------------------------------------------------------

DENSENET_BLOCKS = {
    121: [6, 12, 24, 16],
    169: [6, 12, 32, 32],
    201: [6, 12, 48, 32],
}


def densenet(depth, input_hw):
    blocks = DENSENET_BLOCKS[depth]
    growth = 32
    layers = []

    def add(layer):
        layers.append(layer)
        return len(layers) - 1

    prev = add(conv("stem", input_hw, 3, 64, 7, stride=2))
    hw = out_hw(input_hw, 2, "same", 7)
    hw = (hw + 1) // 2
    in_c = 64
    for stage, n_layers in enumerate(blocks):
        for i in range(n_layers):
            tag = f"d{stage + 1}l{i + 1}"
            b = add(conv(f"{tag}_b", hw, in_c, 4 * growth, 1, preds=[prev]))
            prev = add(conv(f"{tag}_c", hw, 4 * growth, growth, 3, preds=[b]))
            in_c += growth
        if stage + 1 < len(blocks):
            out_c = in_c // 2
            prev = add(conv(f"t{stage + 1}", hw, in_c, out_c, 1, preds=[prev]))
            hw = (hw + 1) // 2  # 2x2/2 average pool
            in_c = out_c
    add(dense("fc", in_c, 1000, activation=False, preds=[prev]))
    return layers


# ---------------------------------------------------------------------
# Inception-v3 (standard 299 stack; channel schedule per the published
# architecture, auxiliary head omitted)
# ---------------------------------------------------------------------


def inception_v3(input_hw):
    layers = []

    def add(layer):
        layers.append(layer)
        return len(layers) - 1

    prev = add(conv("c1", input_hw, 3, 32, 3, stride=2, padding="valid"))
    hw = out_hw(input_hw, 2, "valid", 3)
    prev = add(conv("c2", hw, 32, 32, 3, padding="valid", preds=[prev]))
    hw = out_hw(hw, 1, "valid", 3)
    prev = add(conv("c3", hw, 32, 64, 3, preds=[prev]))
    hw = (hw - 3) // 2 + 1  # pool
    prev = add(conv("c4", hw, 64, 80, 1, padding="valid", preds=[prev]))
    prev = add(conv("c5", hw, 80, 192, 3, padding="valid", preds=[prev]))
    hw = out_hw(hw, 1, "valid", 3)
    hw = (hw - 3) // 2 + 1  # pool
    in_c = 192

    def mix_a(tag, in_c, pool_c, prev):
        b1 = add(conv(f"{tag}_1x1", hw, in_c, 64, 1, preds=[prev]))
        b2a = add(conv(f"{tag}_5a", hw, in_c, 48, 1, preds=[prev]))
        b2b = add(conv(f"{tag}_5b", hw, 48, 64, 5, preds=[b2a]))
        b3a = add(conv(f"{tag}_3a", hw, in_c, 64, 1, preds=[prev]))
        b3b = add(conv(f"{tag}_3b", hw, 64, 96, 3, preds=[b3a]))
        b3c = add(conv(f"{tag}_3c", hw, 96, 96, 3, preds=[b3b]))
        bp = add(conv(f"{tag}_p", hw, in_c, pool_c, 1, preds=[prev]))
        _ = (b1, b2b, b3c, bp)
        return b3c, 64 + 64 + 96 + pool_c

    prev, in_c = mix_a("m1", in_c, 32, prev)
    prev, in_c = mix_a("m2", in_c, 64, prev)
    prev, in_c = mix_a("m3", in_c, 64, prev)

    # grid reduction to 17x17
    hw2 = (hw - 3) // 2 + 1
    r1 = add(conv("r1_3", hw, in_c, 384, 3, stride=2, padding="valid",
                  preds=[prev]))
    r2a = add(conv("r1_da", hw, in_c, 64, 1, preds=[prev]))
    r2b = add(conv("r1_db", hw, 64, 96, 3, preds=[r2a]))
    r2c = add(conv("r1_dc", hw, 96, 96, 3, stride=2, padding="valid",
                   preds=[r2b]))
    _ = r1
    prev = r2c
    hw = hw2
    in_c = 384 + 96 + in_c

    def mix_b(tag, in_c, c7, prev):
        # 7x7 convs factorized into 1x7 / 7x1 pairs
        b1 = add(conv(f"{tag}_1x1", hw, in_c, 192, 1, preds=[prev]))
        b2a = add(conv(f"{tag}_7a", hw, in_c, c7, 1, preds=[prev]))
        b2b = add(conv(f"{tag}_7b", hw, c7, c7, 1, kw=7, preds=[b2a]))
        b2c = add(conv(f"{tag}_7c", hw, c7, 192, 7, kw=1, preds=[b2b]))
        b3a = add(conv(f"{tag}_7d", hw, in_c, c7, 1, preds=[prev]))
        b3b = add(conv(f"{tag}_7e", hw, c7, c7, 7, kw=1, preds=[b3a]))
        b3c = add(conv(f"{tag}_7f", hw, c7, c7, 1, kw=7, preds=[b3b]))
        b3d = add(conv(f"{tag}_7g", hw, c7, c7, 7, kw=1, preds=[b3c]))
        b3e = add(conv(f"{tag}_7h", hw, c7, 192, 1, kw=7, preds=[b3d]))
        bp = add(conv(f"{tag}_p", hw, in_c, 192, 1, preds=[prev]))
        _ = (b1, b2c, b3e, bp)
        return b3e, 192 * 4

    prev, in_c = mix_b("m4", in_c, 128, prev)
    prev, in_c = mix_b("m5", in_c, 160, prev)
    prev, in_c = mix_b("m6", in_c, 160, prev)
    prev, in_c = mix_b("m7", in_c, 192, prev)

    # grid reduction to 8x8
    hw2 = (hw - 3) // 2 + 1
    s1a = add(conv("r2_a", hw, in_c, 192, 1, preds=[prev]))
    s1b = add(conv("r2_b", hw, 192, 320, 3, stride=2, padding="valid",
                   preds=[s1a]))
    s2a = add(conv("r2_c", hw, in_c, 192, 1, preds=[prev]))
    s2b = add(conv("r2_d", hw, 192, 192, 1, kw=7, preds=[s2a]))
    s2b2 = add(conv("r2_d2", hw, 192, 192, 7, kw=1, preds=[s2b]))
    s2c = add(conv("r2_e", hw, 192, 192, 3, stride=2, padding="valid",
                   preds=[s2b2]))
    _ = s1b
    prev = s2c
    hw = hw2
    in_c = 320 + 192 + in_c

    def mix_c(tag, in_c, prev):
        b1 = add(conv(f"{tag}_1x1", hw, in_c, 320, 1, preds=[prev]))
        b2a = add(conv(f"{tag}_3a", hw, in_c, 384, 1, preds=[prev]))
        b2b = add(conv(f"{tag}_3b", hw, 384, 384, 3, preds=[b2a]))
        b3a = add(conv(f"{tag}_da", hw, in_c, 448, 1, preds=[prev]))
        b3b = add(conv(f"{tag}_db", hw, 448, 384, 3, preds=[b3a]))
        b3c = add(conv(f"{tag}_dc", hw, 384, 384, 3, preds=[b3b]))
        bp = add(conv(f"{tag}_p", hw, in_c, 192, 1, preds=[prev]))
        _ = (b1, b2b, b3c, bp)
        return b3c, 320 + 2 * 384 + 2 * 384 + 192

    prev, in_c = mix_c("m8", in_c, prev)
    prev, in_c = mix_c("m9", in_c, prev)
    add(dense("fc", in_c, 1000, activation=False, preds=[prev]))
    return layers


# ---------------------------------------------------------------------
# BERT (attention pre-lowered to matmuls; 64-dim heads, FFN = 4H)
# ---------------------------------------------------------------------

BERT_SHAPES = {
    "mini": (4, 256),
    "small": (4, 512),
    "medium": (8, 512),
    "base": (12, 768),
    "large": (24, 1024),
}


def bert(variant, seq_len):
    n_layers, hidden = BERT_SHAPES[variant]
    heads = hidden // 64
    layers = []

    def add(layer):
        layers.append(layer)
        return len(layers) - 1

    prev = None
    for i in range(n_layers):
        tag = f"l{i + 1}"
        preds = [prev] if prev is not None else []
        q = add(dense(f"{tag}_q", hidden, hidden, seq_len,
                      activation=False, preds=preds))
        k = add(dense(f"{tag}_k", hidden, hidden, seq_len,
                      activation=False, preds=preds))
        v = add(dense(f"{tag}_v", hidden, hidden, seq_len,
                      activation=False, preds=preds))
        # score: per head (seq x 64) x (64 x seq); heads fold into batch
        sc = add({
            "id": f"{tag}_score",
            "kind": "matmul",
            "in_features": 64,
            "out_features": seq_len,
            "seq_len": heads * seq_len,
            "activation": True,  # softmax applied on the way out
            "predecessors": [q, k],
        })
        cx = add({
            "id": f"{tag}_ctx",
            "kind": "matmul",
            "in_features": seq_len,
            "out_features": 64,
            "seq_len": heads * seq_len,
            "activation": False,
            "predecessors": [sc, v],
        })
        o = add(dense(f"{tag}_o", hidden, hidden, seq_len,
                      activation=False, preds=[cx]))
        f1 = add(dense(f"{tag}_f1", hidden, 4 * hidden, seq_len,
                       preds=[o]))
        prev = add(dense(f"{tag}_f2", 4 * hidden, hidden, seq_len,
                         activation=False, preds=[f1]))
    return layers


# ---------------------------------------------------------------------


def emit(out_dir, name, batch, layers):
    # builders track predecessors by index; the file schema uses layer ids
    for layer in layers:
        layer["predecessors"] = [layers[p]["id"]
                                 for p in layer["predecessors"]]
    path = os.path.join(out_dir, f"{name}.json")
    with open(path, "w") as f:
        json.dump({"name": name, "batch": batch, "layers": layers}, f,
                  indent=1)
        f.write("\n")
    return path


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="models")
    ap.add_argument("--batch", type=int, default=1)
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    for depth in (50, 101, 152):
        for hw in (224, 256, 299):
            emit(args.out, f"resnet{depth}_{hw}", args.batch,
                 resnet(depth, hw))
    for depth in (121, 169, 201):
        for hw in (224, 256, 299):
            emit(args.out, f"densenet{depth}_{hw}", args.batch,
                 densenet(depth, hw))
    for hw in (224, 256, 299):
        emit(args.out, f"inception_v3_{hw}", args.batch, inception_v3(hw))
    for variant in BERT_SHAPES:
        for seq in (10, 20, 40, 60, 80, 100, 200, 300, 400, 500):
            emit(args.out, f"bert_{variant}_seq{seq}", args.batch,
                 bert(variant, seq))
    print(f"wrote models to {args.out}/")


if __name__ == "__main__":
    main()
