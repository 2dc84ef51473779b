"""Build an inverted index over a toy corpus and search it with BM25.

Run:  python3 demos/01_bm25_retrieval.py
"""

from distilrank import Document, bm25_score, build_index, search_bm25
from distilrank.tokenization import tokenize

corpus = [
    Document("d1", "The quick brown fox jumps over the lazy dog."),
    Document("d2", "A fox is a small omnivorous mammal."),
    Document("d3", "Dogs are loyal companions and love long walks."),
    Document("d4", "Quick thinking saved the hikers from the storm."),
    Document("d5", "The brown bear and the fox shared the forest."),
]

index = build_index(corpus, k1=0.9, b=0.4)
print(f"indexed {index.n_docs} documents, {len(index.postings)} distinct terms, "
      f"avgdl={index.avgdl:.2f} tokens\n")

for query in ["brown fox", "lazy dog", "storm"]:
    print(f"query: {query!r}")
    for hit in search_bm25(index, query, k=3):
        print(f"  {hit.doc_id}  {hit.score:.4f}")
    print()

# the same number, computed one document at a time
tokens = tokenize("brown fox")
print("per-document scores for 'brown fox':")
for ordinal, doc_id in enumerate(index.doc_ids):
    print(f"  {doc_id}  {bm25_score(index, tokens, ordinal):.4f}")
