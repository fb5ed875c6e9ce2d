# Copyright 2026 The sgformer-cpp Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.


"""Convert a Planetoid citation dataset (Cora, CiteSeer, PubMed) to the
directory layout read by `sgf train --data`.

Accepts either the raw `ind.<name>.{x,y,tx,ty,allx,ally,graph,test.index}`
files or a single .npz with keys adj_data/adj_indices/adj_indptr/adj_shape,
attr_data/attr_indices/attr_indptr/attr_shape and labels (the "npz"
distribution). Uses the standard public split: 20 labelled nodes per class
for training, the next 500 for validation and the 1000 test indices.
"""

import argparse
import json
import pickle
import sys
from pathlib import Path

import numpy as np
import scipy.sparse as sp


def _load_pickle(path):
    with open(path, "rb") as f:
        if sys.version_info >= (3, 0):
            return pickle.load(f, encoding="latin1")
        return pickle.load(f)


def load_raw(root, name):
    root = Path(root)
    parts = {}
    for key in ("x", "y", "tx", "ty", "allx", "ally", "graph"):
        parts[key] = _load_pickle(root / f"ind.{name}.{key}")
    test_idx = np.loadtxt(root / f"ind.{name}.test.index", dtype=np.int64)
    test_sorted = np.sort(test_idx)

    tx, ty = parts["tx"], parts["ty"]
    if name == "citeseer":
        # Isolated test nodes are missing from tx/ty; pad with zero rows.
        full = np.arange(test_sorted.min(), test_sorted.max() + 1)
        tx_ext = sp.lil_matrix((len(full), tx.shape[1]))
        tx_ext[test_sorted - test_sorted.min(), :] = tx
        ty_ext = np.zeros((len(full), ty.shape[1]))
        ty_ext[test_sorted - test_sorted.min(), :] = ty
        tx, ty = tx_ext, ty_ext

    features = sp.vstack((parts["allx"], tx)).tolil()
    features[test_idx, :] = features[test_sorted, :]
    labels = np.vstack((parts["ally"], ty))
    labels[test_idx, :] = labels[test_sorted, :]

    n = features.shape[0]
    rows, cols = [], []
    for u, nbrs in parts["graph"].items():
        for v in nbrs:
            if u < n and v < n:
                rows.append(u)
                cols.append(v)
    adj = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))

    y = labels.argmax(axis=1).astype(np.int64)
    y[labels.sum(axis=1) == 0] = -1
    train = list(range(len(parts["y"])))
    valid = list(range(len(parts["y"]), len(parts["y"]) + 500))
    test = sorted(int(i) for i in test_idx)
    return features.tocsr(), adj, y, (train, valid, test)


def load_npz(path, seed):
    with np.load(path, allow_pickle=True) as z:
        adj = sp.csr_matrix((z["adj_data"], z["adj_indices"], z["adj_indptr"]),
                            shape=tuple(z["adj_shape"]))
        attr = sp.csr_matrix((z["attr_data"], z["attr_indices"], z["attr_indptr"]),
                             shape=tuple(z["attr_shape"]))
        y = np.asarray(z["labels"], dtype=np.int64)
    return attr, adj.tocoo(), y, planetoid_split(y, seed)


def planetoid_split(y, seed, per_class=20, n_valid=500, n_test=1000):
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(y))
    train, taken = [], np.zeros(len(y), dtype=bool)
    for c in np.unique(y[y >= 0]):
        idx = [i for i in order if y[i] == c][:per_class]
        train.extend(idx)
        taken[idx] = True
    rest = [int(i) for i in order if not taken[i] and y[i] >= 0]
    return sorted(int(i) for i in train), sorted(rest[:n_valid]), \
        sorted(rest[n_valid:n_valid + n_test])


def write_dataset(out, features, adj, y, split, row_normalize):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    x = np.asarray(features.todense(), dtype=np.float64)
    if row_normalize:
        s = x.sum(axis=1, keepdims=True)
        s[s == 0] = 1.0
        x = x / s
    n, d = x.shape

    # Undirected, deduplicated, no self loops (the loader adds them).
    a = adj.tocoo()
    pairs = {(min(u, v), max(u, v)) for u, v in zip(a.row.tolist(), a.col.tolist()) if u != v}
    with open(out / "edges.csv", "w") as f:
        f.write("src,dst\n")
        for u, v in sorted(pairs):
            f.write(f"{u},{v}\n")

    x.astype("<f4").tofile(out / "features.bin")
    with open(out / "labels.csv", "w") as f:
        f.write("node,label\n")
        # Every node needs a label; unlabelled ones get 0 and sit in no split.
        for i, c in enumerate(y.tolist()):
            f.write(f"{i},{max(c, 0)}\n")
    train, valid, test = split
    labelled = set(np.flatnonzero(y >= 0).tolist())
    test = [i for i in test if i in labelled]
    (out / "split.json").write_text(json.dumps({"train": train, "valid": valid, "test": test}))
    split[2][:] = test
    meta = {"num_classes": int(y.max()) + 1, "num_features": int(d), "num_nodes": int(n),
            "task": "multiclass"}
    (out / "meta.json").write_text(json.dumps(meta))
    return n, len(pairs), d


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("source", help="directory with ind.<name>.* files, or an .npz file")
    ap.add_argument("out", help="output dataset directory")
    ap.add_argument("--name", default="cora")
    ap.add_argument("--seed", type=int, default=0, help="split seed (npz input only)")
    ap.add_argument("--no-row-normalize", action="store_true",
                    help="keep raw bag-of-words features")
    args = ap.parse_args(argv)

    src = Path(args.source)
    if src.suffix == ".npz":
        features, adj, y, split = load_npz(src, args.seed)
    else:
        features, adj, y, split = load_raw(src, args.name.lower())
    n, m, d = write_dataset(args.out, features, adj, y, split, not args.no_row_normalize)
    print(f"{args.out}: {n} nodes, {m} edges, {d} features, "
          f"{len(split[0])}/{len(split[1])}/{len(split[2])} train/valid/test")


if __name__ == "__main__":
    main()
