"""Parse Penman graphs, compare them with S2match, and look at the alignment."""

from swan.amr import canonicalize, parse_penman, serialize_penman, to_triples
from swan.matcher import MatchConfig, SimilarityTable, s2match

want = parse_penman("(w / want-01 :ARG0 (b / boy) :ARG1 (b2 / believe-01 :ARG0 (g / girl) :ARG1 b))")
print(serialize_penman(want, indent=4))
print()

# the same graph with different variable names and edge order
renamed = parse_penman("(x / want-01 :ARG1 (y / believe-01 :ARG1 (z / boy) :ARG0 (q / girl)) :ARG0 z)")
print("canonical forms equal:", canonicalize(want) == canonicalize(renamed))
print("f1 against renamed copy:", s2match(want, renamed).f1)

for t in to_triples(want):
    print("  ", t)

# swap the boy for a girl: 3 of 4 triples line up on each side
a = parse_penman("(w / want-01 :ARG0 (b / boy))")
b = parse_penman("(w / want-01 :ARG0 (g / girl))")
score = s2match(a, b)
print("\nboy vs girl:", round(score.f1, 4), "alignment", score.alignment.mapping)

# soft credit from a similarity table
soft = MatchConfig(concept_similarity=SimilarityTable({("boy", "girl"): 0.5}))
print("with boy~girl=0.5:", round(s2match(a, b, soft).f1, 4))

# the exact oracle agrees on small graphs
print("oracle:", s2match(a, b, MatchConfig(mode="exact_oracle")).f1)
