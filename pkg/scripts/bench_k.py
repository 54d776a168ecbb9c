"""Mean signature comparison time as a function of k (random unit vectors, D=100)."""
import argparse

from latentsim.cli import bench


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--k", default="10,50,100,200,400")
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--dim", type=int, default=100)
    args = parser.parse_args()
    rows = bench([int(k) for k in args.k.split(",")], args.repeats, args.dim)
    print("k,mean_seconds,ratio_to_previous")
    prev = None
    for k, t in rows:
        print(f"{k},{t:.6f},{'' if prev is None else f'{t / prev:.1f}'}")
        prev = t


if __name__ == "__main__":
    main()
