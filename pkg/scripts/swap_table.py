"""Print the outer/inner Bell expansion of |B B> for both phase conventions."""

from qspacetime.hilbert import BELL_ORDER
from qspacetime.swap import verify_swap_identities

SHORT = {"PsiPlus": "Ψ+", "PsiMinus": "Ψ-", "PhiPlus": "Φ+", "PhiMinus": "Φ-"}


def fmt(c: complex) -> str:
    return f"{c.real:+.3f}" if abs(c.imag) < 1e-12 else f"{c.real:+.2f}{c.imag:+.2f}i"


def main():
    for convention in ("standard", "magic"):
        rep = verify_swap_identities(convention)
        print(f"{convention} phases (max residual {rep.max_residual:.1e})")
        print(f"  {'|B01 B23>':>9} " + "".join(f"{SHORT[b.value] * 2:>9}" for b in BELL_ORDER))
        for lhs, coeffs in rep.phase_table.items():
            cells = "".join(f"{fmt(c):>9}" for c in coeffs)
            print(f"  {SHORT[lhs]:>9} {cells}")
        print()


if __name__ == "__main__":
    main()
