"""Audit verdicts and channel capacity estimates for every box kind."""

import argparse

from qspacetime.sync import DECODERS, ENCODERS, CorrelationBox, entangled_sync_attempt, nosignaling_audit


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--samples", type=int, default=100_000)
    parser.add_argument("--epsilon", type=float, default=0.2)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    boxes = [CorrelationBox(k) for k in ("classical_linear", "quantum_singlet", "heaviside")]
    boxes.append(CorrelationBox("signaling", args.epsilon))
    for box in boxes:
        audit = nosignaling_audit(box, samples=args.samples, rng=args.seed)
        best = max(
            (entangled_sync_attempt(box, e, d, args.samples, rng=args.seed) for e in ENCODERS for d in DECODERS),
            key=lambda r: r.mutual_information,
        )
        effect = "" if audit.effect_size is None else f" (bias {audit.effect_size:.3f})"
        print(f"{box.kind:>16}: audit {audit.verdict}{effect}; best channel {best.encoder}/{best.decoder} "
              f"carries {best.mutual_information:.2e} bits per round")


if __name__ == "__main__":
    main()
