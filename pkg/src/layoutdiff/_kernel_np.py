"""Pure-numpy fallback for the annealed-Langevin chain kernel.

Mirrors layoutdiff._kernel.run_chains step for step; used when the compiled
extension is unavailable (or forced via LAYOUTDIFF_BACKEND=numpy).
"""
import numpy as np

BACKEND_NAME = "numpy"


def run_chains(x, noise, pos_w, pos_b, dec_w, dec_b, flat,
               grp_off, grp_outw, grp_start, e_subj, e_obj, counts, mean_agg,
               size_lat, scene_lat, time_lat, eta, inv_sqrt_om,
               K, noise_scale, clip):
    C, n, _ = x.shape
    T = len(eta)
    D = size_lat.shape[1]
    G = len(grp_outw)

    # unpack denoiser layers once; views into the flat parameter block
    layers = []
    for g in range(G):
        o_w1, o_b1, o_w2, o_b2, o_w3, o_b3 = grp_off[g]
        outw = int(grp_outw[g])
        layers.append((
            flat[o_w1:o_w1 + 3 * D * D].reshape(3 * D, D),
            flat[o_b1:o_b1 + D],
            flat[o_w2:o_w2 + D * D].reshape(D, D),
            flat[o_b2:o_b2 + D],
            flat[o_w3:o_w3 + D * outw].reshape(D, outw),
            flat[o_b3:o_b3 + outw],
        ))

    sqrt_eta = np.sqrt(eta)
    for t in range(T - 1, -1, -1):
        for k in range(K):
            s = (T - 1 - t) * K + k
            x2d = x.reshape(C * n, 2)
            L = (size_lat[None, :, :]
                 + np.tanh(x2d @ pos_w + pos_b).reshape(C, n, D))
            acc = np.zeros((C, n, D))
            for g in range(G):
                lo, hi = int(grp_start[g]), int(grp_start[g + 1])
                subj = e_subj[lo:hi]
                obj = e_obj[lo:hi]
                w1, b1, w2, b2, w3, b3 = layers[g]
                eg = hi - lo
                U = np.empty((C, eg, 3 * D))
                U[:, :, :D] = L[:, subj, :]
                scene_rows = obj < 0
                U[:, :, D:2 * D] = np.where(scene_rows[None, :, None], scene_lat,
                                            L[:, np.maximum(obj, 0), :])
                U[:, :, 2 * D:] = time_lat[t]
                H1 = np.tanh(U.reshape(C * eg, 3 * D) @ w1 + b1)
                H2 = np.tanh(H1 @ w2 + b2)
                O = (H2 @ w3 + b3).reshape(C, eg, -1)
                np.add.at(acc, (slice(None), subj), O[:, :, :D])
                real = ~scene_rows
                if real.any():
                    np.add.at(acc, (slice(None), obj[real]), O[:, real, D:])
            if mean_agg:
                acc = acc / counts[None, :, None]
            eps_hat = acc.reshape(C * n, D) @ dec_w + dec_b
            score = -eps_hat.reshape(C, n, 2) * inv_sqrt_om[t]
            x += 0.5 * eta[t] * score + sqrt_eta[t] * noise_scale * noise[:, s]
            if clip:
                np.clip(x, 0.0, 1.0, out=x)
