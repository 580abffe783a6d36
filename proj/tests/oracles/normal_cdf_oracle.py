"""High-precision reference values for the standard normal CDF (50 digits)."""
import mpmath as mp

mp.mp.dps = 50
for x in ["-8", "-5", "-1.1906", "-1", "-0.5", "0", "0.3", "1.5", "3", "8"]:
    v = mp.ncdf(mp.mpf(x))
    print(f"{{{x}, {mp.nstr(v, 20)}}},")
