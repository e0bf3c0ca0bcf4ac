"""Parameter counts enumerated from layer shapes alone, without building modules.

Used as an independent oracle for the frozen golden counts in test_blocks.
"""


def affine(i, o, bias=True):
    return i * o + (o if bias else 0)


def conv(c_in, c_out, k):
    return c_out * c_in * k + c_out


def norm(d):
    return 2 * d


def mha(d, mechanism):
    # queries keep a bias except under auto-correlation; keys never have one
    q = affine(d, d, bias=mechanism != "autocorr")
    return q + affine(d, d, bias=False) + affine(d, d) + affine(d, d)


def pointwise_ffn(d):
    return affine(d, 4 * d) + affine(4 * d, d)


def multiscale_ffn(d, kernels):
    return sum(conv(d, d, k) for k in kernels) + len(kernels)


def gate(d):
    return d * d + 2 * d


def transformer_layer(d, mechanism, ffn):
    return mha(d, mechanism) + ffn + 2 * norm(d)


def blockrec_layer(d, ffn, recurrent):
    n = mha(d, "full") + mha(d, "cross") + ffn + 2 * norm(d)
    if recurrent:
        n += 2 * mha(d, "full") + 2 * norm(d) + pointwise_ffn(d) + 2 * gate(d)
    return n


def gaussian(g, d):
    return 2 * g + g * d


def head(n, units, subjects):
    k = min(128, n)
    k = k if k % 2 else k - 1
    return conv(1, units, k) + conv(units, units, k) + affine(units * (n // 2), subjects)


def lstm(d_in, u):
    return d_in * 4 * u + u * 4 * u + 4 * u


def count(variant, L=80, c=6, d_t=64, d_c=96, subjects=8, G=10, head_units=16, conv_units=6, conv_kernel=5, lstm_units=3):
    dense = 3 * L // 2
    if variant in ("cnn", "cnn_rnn"):
        convs = conv(c, conv_units, conv_kernel) + 3 * conv(conv_units, conv_units, conv_kernel)
    if variant in ("rnn", "cnn_rnn"):
        lstms = lstm(c, lstm_units) + 2 * lstm(lstm_units, lstm_units)
    if variant == "cnn":
        return convs + affine(conv_units * (L // 4), dense) + affine(dense, subjects)
    if variant == "rnn":
        return lstms + affine(lstm_units * L, dense) + affine(dense, subjects)
    if variant == "cnn_rnn":
        return convs + lstms + affine((conv_units + lstm_units) * L, dense) + affine(dense, subjects)

    pffn_t = pointwise_ffn(d_t)
    if variant == "vanilla":
        temporal = 5 * transformer_layer(d_t, "full", pffn_t)
    elif variant == "informer":
        temporal = 5 * transformer_layer(d_t, "probsparse", pffn_t)
    elif variant == "autoformer":
        temporal = 5 * transformer_layer(d_t, "autocorr", pffn_t)
    elif variant == "block_recurrent":
        temporal = 11 * blockrec_layer(d_t, pffn_t, False) + blockrec_layer(d_t, pffn_t, True)
    elif variant == "that":
        temporal = 9 * transformer_layer(d_t, "full", multiscale_ffn(d_t, (1, 3, 5))) + gaussian(G, d_t)
    elif variant == "proposed":
        ms = multiscale_ffn(d_t, (1, 3, 5, 7))
        temporal = 11 * transformer_layer(d_t, "autocorr", ms) + blockrec_layer(d_t, ms, True) + gaussian(G, d_t)
    else:
        raise ValueError(variant)
    total = affine(c, d_t) + temporal
    n = d_t
    if variant == "that":
        total += affine(L, d_c) + transformer_layer(d_c, "full", multiscale_ffn(d_c, (1, 3, 5)))
        n += d_c
    if variant == "proposed":
        total += affine(L, d_c) + gaussian(G, d_c) + transformer_layer(d_c, "autocorr", multiscale_ffn(d_c, (1, 3, 5, 7)))
        n += d_c
    return total + head(n, head_units, subjects)
