"""Walk the two-word toy example through the full client flow and print each step."""
import json

from latentsim.backend import LocalBackend, Registry
from latentsim.embedding import parse_model
from latentsim.pipeline import SignConfig, score_document, sign_scored
from latentsim.relevance import top_k_words
from latentsim.signature import deserialize, serialize
from latentsim.textprep import ReferenceDocument

MODEL = "2 3\ncountry -0.25 0.5 0.75\nnation -0.23 0.51 0.6\n"


def main():
    registry = Registry()
    registry.submit_df("u1", ["country", "nation"])
    registry.submit_df("u2", ["weather"])
    registry.submit_df("u3", ["football"])
    backend = LocalBackend(registry, parse_model(MODEL))
    config = SignConfig(k=2)

    doc = ReferenceDocument("A", ["country"] * 5 + ["nation"] * 6)
    scored, decoys = score_document(doc, backend, config)
    print("tf-idf:", json.dumps(scored.tfidf))
    print("top-k:", top_k_words(scored, config.k))
    sig = sign_scored(doc.user_id, scored, backend, config, decoys)
    print("weights:", sig.weights.tolist())
    print("vectors:", sig.vectors.tolist())
    data = serialize(sig)
    print(f"wire size: {len(data)} bytes")
    print("after f16 round trip:", deserialize(data).weights.tolist())


if __name__ == "__main__":
    main()
