import math

from misr_refkit.metrics import CMSE_FLOOR


def brute_cpsnr(sr, hr, mask, border=3):
    """Scalar reimplementation: nested loops, exact sums via fsum."""
    h, w = len(hr), len(hr[0])
    best = None
    for u in range(2 * border + 1):
        for v in range(2 * border + 1):
            diffs = []
            for y in range(border, h - border):
                for x in range(border, w - border):
                    if mask[y][x]:
                        diffs.append(float(hr[y][x]) - float(sr[u + y - border][v + x - border]))
            if not diffs:
                continue
            b = math.fsum(diffs) / len(diffs)
            mse = math.fsum((d - b) ** 2 for d in diffs) / len(diffs)
            score = -10 * math.log10(max(mse, CMSE_FLOOR))
            if best is None or score > best[0]:
                best = (score, (u, v), b)
    return best
