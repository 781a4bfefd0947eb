"""Builds the evaluate golden fixture with a brute-force reference.

Writes gt/{poses,times}.txt, est/{poses,times}.txt and expected.csv.
Run from this directory: python3 make_golden.py
"""
import math
import os

import numpy as np

rng = np.random.default_rng(20240611)


def rot(axis, angle):
    axis = np.asarray(axis, float)
    axis = axis / np.linalg.norm(axis)
    k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + math.sin(angle) * k + (1 - math.cos(angle)) * k @ k


def orthonormalize(r):
    u, _, vt = np.linalg.svd(r)
    return u @ vt


gt, est = [], []
R, t = np.eye(3), np.zeros(3)
D, d = np.eye(3), np.zeros(3)
for k in range(50):
    step_r = rot([rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), 1.0], rng.uniform(-0.15, 0.15))
    step_t = np.array([rng.uniform(0.6, 1.4), rng.uniform(-0.2, 0.2), rng.uniform(-0.05, 0.05)])
    t = R @ step_t + t
    R = orthonormalize(R @ step_r)
    gt.append((0.1 * k, R.copy(), t.copy()))
    wob = rot(rng.uniform(-1, 1, 3) + [0, 0, 1.5], rng.uniform(-0.01, 0.01))
    d = D @ rng.uniform(-0.03, 0.03, 3) + d
    D = orthonormalize(D @ wob)
    if rng.uniform() < 0.85:
        est.append((0.1 * k + rng.uniform(-0.02, 0.02), orthonormalize(D @ R), D @ t + d))


def write(name, traj):
    os.makedirs(name, exist_ok=True)
    with open(os.path.join(name, "poses.txt"), "w") as f:
        for _, r, p in traj:
            vals = [r[0, 0], r[0, 1], r[0, 2], p[0], r[1, 0], r[1, 1], r[1, 2], p[1], r[2, 0], r[2, 1], r[2, 2], p[2]]
            f.write(" ".join(repr(float(v)) for v in vals) + "\n")
    with open(os.path.join(name, "times.txt"), "w") as f:
        for time, _, _ in traj:
            f.write(repr(float(time)) + "\n")


def read(name):
    poses = [list(map(float, l.split())) for l in open(os.path.join(name, "poses.txt"))]
    times = [float(l) for l in open(os.path.join(name, "times.txt"))]
    out = []
    for time, v in zip(times, poses):
        m = np.array(v).reshape(3, 4)
        out.append((time, m[:, :3], m[:, 3]))
    return out


write("gt", gt)
write("est", est)
gt, est = read("gt"), read("est")

dts = sorted(gt[i + 1][0] - gt[i][0] for i in range(len(gt) - 1))
tol = dts[len(dts) // 2] / 2
pairs, last = [], -1
for i, (te, _, _) in enumerate(est):
    j = min(range(len(gt)), key=lambda j: (abs(gt[j][0] - te), j))
    if abs(gt[j][0] - te) <= tol and j > last:
        pairs.append((i, j))
        last = j


def horn(src, dst, scale):
    cs, cd = src.mean(0), dst.mean(0)
    m = (src - cs).T @ (dst - cd)
    (sxx, sxy, sxz), (syx, syy, syz), (szx, szy, szz) = m
    n = np.array([
        [sxx + syy + szz, syz - szy, szx - sxz, sxy - syx],
        [syz - szy, sxx - syy - szz, sxy + syx, szx + sxz],
        [szx - sxz, sxy + syx, -sxx + syy - szz, syz + szy],
        [sxy - syx, szx + sxz, syz + szy, -sxx - syy + szz],
    ])
    w, v = np.linalg.eigh(n)
    q0, qx, qy, qz = v[:, np.argmax(w)]
    r = np.array([
        [1 - 2 * (qy * qy + qz * qz), 2 * (qx * qy - q0 * qz), 2 * (qx * qz + q0 * qy)],
        [2 * (qx * qy + q0 * qz), 1 - 2 * (qx * qx + qz * qz), 2 * (qy * qz - q0 * qx)],
        [2 * (qx * qz - q0 * qy), 2 * (qy * qz + q0 * qx), 1 - 2 * (qx * qx + qy * qy)],
    ])
    s = 1.0
    if scale:
        s = sum((dst[k] - cd) @ (r @ (src[k] - cs)) for k in range(len(src))) / ((src - cs) ** 2).sum()
    return r, cd - s * r @ cs, s


def stats(e):
    e = sorted(e)
    n = len(e)
    med = e[n // 2] if n % 2 else 0.5 * (e[n // 2 - 1] + e[n // 2])
    return [sum(e) / n, med, math.sqrt(sum(x * x for x in e) / n), max(e), n]


length = sum(np.linalg.norm(gt[k + 1][2] - gt[k][2]) for k in range(len(gt) - 1))
src = np.array([est[i][2] for i, _ in pairs])
dst = np.array([gt[j][2] for _, j in pairs])

rows = []
for align in ["none", "rigid", "similarity"]:
    if align == "none":
        r, tr, s = np.eye(3), np.zeros(3), 1.0
    else:
        r, tr, s = horn(src, dst, align == "similarity")
    errs = [np.linalg.norm(s * r @ src[k] + tr - dst[k]) for k in range(len(src))]
    st = stats(errs)
    rows.append([align, "APE(m)"] + st)
    rows.append([align, "APE(%)"] + [v * 100 / length for v in st[:4]] + [st[4]])

tr_err, rot_err = [], []
for k in range(len(pairs) - 1):
    (ei, gi), (ej, gj) = pairs[k], pairs[k + 1]
    rq = gt[gi][1].T @ gt[gj][1]
    tq = gt[gi][1].T @ (gt[gj][2] - gt[gi][2])
    rp = est[ei][1].T @ est[ej][1]
    tp = est[ei][1].T @ (est[ej][2] - est[ei][2])
    tr_err.append(np.linalg.norm(rq.T @ (tp - tq)))
    c = min(1.0, max(-1.0, (np.trace(rq.T @ rp) - 1) / 2))
    rot_err.append(math.degrees(math.acos(c)))
rows.append(["any", "RPE(m)"] + stats(tr_err))
rows.append(["any", "RPE(deg)"] + stats(rot_err))

with open("expected.csv", "w") as f:
    f.write("align,metric,mean,median,rmse,max,count\n")
    for row in rows:
        f.write(",".join(repr(float(v)) if isinstance(v, float) else str(v) for v in row) + "\n")
