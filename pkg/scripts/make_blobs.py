#!/usr/bin/env python3
"""Write a synthetic multi-modal blob dataset as a CBFV feature file."""

import argparse

from centroidcl.features import write_feature_file
from centroidcl.synthetic import make_blob_dataset


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--classes", type=int, default=10)
    parser.add_argument("--clusters-per-class", type=int, default=3)
    parser.add_argument("--dim", type=int, default=16)
    parser.add_argument("--samples-per-cluster", type=int, default=42)
    parser.add_argument("--spacing", type=float, default=20.0,
                        help="minimum distance between sub-cluster centers")
    parser.add_argument("--sigma", type=float, default=1.0)
    parser.add_argument("--layout", choices=("box", "shell", "orthoplex"), default="box")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True)
    args = parser.parse_args()

    dataset = make_blob_dataset(
        n_classes=args.classes,
        clusters_per_class=args.clusters_per_class,
        dim=args.dim,
        samples_per_cluster=args.samples_per_cluster,
        center_min_distance=args.spacing,
        sigma=args.sigma,
        seed=args.seed,
        layout=args.layout,
    )
    write_feature_file(dataset, args.out)
    print(f"wrote {len(dataset)} samples, dim {dataset.dim}, "
          f"{dataset.n_classes} classes -> {args.out}")


if __name__ == "__main__":
    main()
