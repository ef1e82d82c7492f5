"""From a continued fraction word to class numbers.

Synthesizes the family whose members have (1 + sqrt d)/2 = [k; 1, 1, 2k - 1],
lists the first members with their units and class numbers, and checks each
class number against a count of reduced quadratic forms.
"""
from cffam import classno, family, harness
from cffam.family import CFWord

word = CFWord("B", (1, 1))
fam = family.synthesize(word, name="chowla")
print(f"word {word.case}{list(word.u)} -> D(n) = {fam.a}n^2 + {fam.b}n + {fam.c}, k(n) = {fam.e}n + {fam.f}")
print("admissibility:", family.admissibility_report(word)["reason"])

print(f"\n{'n':>4} {'d':>8} {'s':>3} {'log eps':>10} {'L(1)':>8} {'h':>3} {'forms':>5}")
for r in harness.scan(fam, 20_000):
    forms = classno.bqf_class_number(r.delta)
    print(f"{r.n:>4} {r.d:>8} {r.s:>3} {r.regulator:>10.4f} {r.L1:>8.4f} {r.h:>3} {forms:>5}")

x = 10**6
ns, ds = family.member_arrays(fam, x)
print(f"\nsquarefree members up to {x:.0e}: {ds.size}, predicted {family.predicted_count(fam, x):.1f}")
records = harness.scan(fam, x)
print("h = 1 for", sum(r.h == 1 for r in records), "of them; largest h", max(r.h for r in records))
