#!/usr/bin/env python3
"""Writes the scripted scenario suite under data/scenarios/."""

import json
import pathlib

OUT = pathlib.Path(__file__).resolve().parent.parent / "data" / "scenarios"

# Each scenario: query, knowledge entries (image score, sections with a
# selection score and per-sentence correlation pins), the scripted VLM
# replies and the scenario LM priors.
SCENARIOS = [
    {
        "id": "s01",
        "question": "Which genus does this red mushroom with white spots belong to?",
        "q_star": "Which genus does the red-capped mushroom with white spots in the image belong to?",
        "answer": "Amanita",
        "priors": [("Amanita", 1.5)],
        "candidates": ["Amanita", "Russula"],
        "parametric": ["The image shows a red mushroom with white spots.", "It resembles an Amanita."],
        "parametric_pins": [0.8, 0.5],
        "rvis": "red cap; white spots on the cap",
        "entries": [
            ("amanita_muscaria", "Amanita muscaria", 0.9, [
                ("description", 0.9, [("Amanita muscaria is a mushroom with a red cap and white spots.", 0.6),
                                      ("Amanita species are common in birch forests.", 0.4)]),
                ("habitat", 0.7, [("The fly agaric grows under birch and pine trees.", None),
                                  ("It fruits in late summer and autumn.", None)]),
            ]),
            ("russula_emetica", "Russula emetica", 0.5, [
                ("description", 0.8, [("Russula emetica has a bright red cap without spots.", 0.3),
                                      ("Russula caps are brittle.", 0.2)]),
            ]),
        ],
        "gt": ("amanita_muscaria", "description"),
    },
    {
        "id": "s02",
        "question": "What is the name of this tower in the image?",
        "q_star": "What is the name of the iron lattice tower shown in the image?",
        "answer": "Eiffel Tower",
        "priors": [("Eiffel Tower", 1.5)],
        "candidates": ["Eiffel Tower", "Tokyo Tower"],
        "parametric": ["The image shows a tall iron lattice tower.", "It looks like the Eiffel Tower."],
        "parametric_pins": [0.6, 0.8],
        "rvis": "iron lattice structure; arched base",
        "entries": [
            ("eiffel_tower", "Eiffel Tower", 0.9, [
                ("description", 0.9, [("The Eiffel Tower is a wrought-iron lattice tower in Paris.", 0.7),
                                      ("The Eiffel Tower was completed in 1889.", 0.5)]),
                ("history", 0.8, [("Gustave Eiffel's company designed and built the structure.", None),
                                  ("It was the tallest structure in the world for decades.", None)]),
            ]),
            ("tokyo_tower", "Tokyo Tower", 0.6, [
                ("description", 0.7, [("Tokyo Tower is a lattice tower inspired by the Eiffel Tower.", 0.2),
                                      ("Tokyo Tower is painted white and orange.", 0.1)]),
            ]),
        ],
        "gt": ("eiffel_tower", "description"),
    },
    {
        "id": "s03",
        "question": "What species of seabird is shown in this image?",
        "q_star": "What species is the seabird with the colourful beak shown in the image?",
        "answer": "Puffin",
        "priors": [("Puffin", 1.5)],
        "candidates": ["Puffin", "Razorbill"],
        "parametric": ["This is a Puffin standing on a cliff.", "Its beak is bright orange."],
        "parametric_pins": [0.9, 0.3],
        "rvis": "bright orange beak; black and white plumage",
        "entries": [
            ("razorbill", "Razorbill", 0.9, [
                ("description", 0.9, [("The Razorbill is a black and white seabird of the North Atlantic.", 0.1),
                                      ("It has a thick blunt bill.", 0.5)]),
                ("breeding", 0.7, [("Razorbill colonies nest on rocky cliffs.", 0.15),
                                   ("Chicks leave the nest before they can fly.", None)]),
            ]),
            ("common_guillemot", "Common guillemot", 0.8, [
                ("description", 0.8, [("Common guillemots gather in dense colonies.", None),
                                      ("They dive deep to catch fish.", None)]),
            ]),
            ("atlantic_puffin", "Atlantic puffin", 0.7, [
                ("description", 0.6, [("The Atlantic Puffin has a colourful beak in the breeding season.", None),
                                      ("It nests in burrows on grassy cliffs.", None)]),
            ]),
        ],
        "gt": ("atlantic_puffin", "description"),
    },
    {
        "id": "s04",
        "question": "Which ancient temple is shown in this image?",
        "q_star": "Which ancient temple with Doric columns is shown in the image?",
        "answer": "Parthenon",
        "priors": [("Parthenon", 1.5)],
        "candidates": ["Parthenon", "Erechtheion"],
        "parametric": ["This is the Parthenon on a rocky hill.", "It has rows of Doric columns."],
        "parametric_pins": [0.9, 0.3],
        "rvis": "rows of Doric columns; rectangular plan",
        "entries": [
            ("erechtheion", "Erechtheion", 0.9, [
                ("description", 0.9, [("The Erechtheion is an ancient temple on the Acropolis of Athens.", 0.1),
                                      ("It is famous for its porch of maidens.", None)]),
                ("history", 0.8, [("The Erechtheion was built between 421 and 406 BC.", 0.1),
                                  ("Its design is unusually asymmetric.", None)]),
            ]),
            ("old_temple_of_athena", "Old Temple of Athena", 0.8, [
                ("description", 0.7, [("The Old Temple of Athena stood next to the Erechtheion.", 0.1),
                                      ("Only its foundations survive today.", 0.5)]),
            ]),
            ("parthenon", "Parthenon", 0.7, [
                ("description", 0.6, [("The Parthenon is a Doric temple on the Acropolis.", None),
                                      ("It was dedicated to the goddess Athena.", None)]),
            ]),
        ],
        "gt": ("parthenon", "description"),
    },
    {
        "id": "s05",
        "question": "What is the name of this waterfall?",
        "q_star": "What is the name of the wide waterfall falling from a cliff in the image?",
        "answer": "Skogafoss",
        "priors": [("Gullfoss", 0.5)],
        "candidates": ["Skogafoss", "Gullfoss"],
        "parametric": ["The image shows a wide waterfall falling from a cliff.", "A rainbow appears in the spray."],
        "parametric_pins": [0.5, 0.2],
        "rvis": "single wide curtain of water; rainbow in the spray",
        "entries": [
            ("skogafoss", "Skogafoss", 0.9, [
                ("description", 0.9, [("Skogafoss is a waterfall on the Skoga river in Iceland.", 0.9),
                                      ("The falls are 60 metres high.", 0.4)]),
                ("legend", 0.8, [("A Viking settler is said to have hidden a chest of gold behind the falls.", None),
                                 ("The legend says the chest was never recovered.", None)]),
            ]),
            ("seljalandsfoss", "Seljalandsfoss", 0.7, [
                ("description", 0.7, [("Seljalandsfoss is a waterfall that visitors can walk behind.", None),
                                      ("It is fed by a glacier river.", None)]),
            ]),
        ],
        "gt": ("skogafoss", "description"),
    },
    {
        "id": "s06",
        "question": "What is the name of this purple flowering plant?",
        "q_star": "What is the name of the plant with purple flower spikes in the image?",
        "answer": "Lavender",
        "priors": [("Rosemary", 0.5)],
        "candidates": ["Lavender", "Rosemary"],
        "parametric": ["The image shows rows of purple flowers in a field.", "The plants have narrow grey leaves."],
        "parametric_pins": [0.6, 0.2],
        "rvis": "purple flower spikes; narrow grey leaves",
        "entries": [
            ("lavender", "Lavender", 0.9, [
                ("description", 0.9, [("Lavender is a flowering plant in the mint family.", 0.9),
                                      ("Lavender flowers are purple and fragrant.", 0.3)]),
                ("cultivation", 0.8, [("The plant prefers dry and sunny slopes.", None),
                                      ("It is grown widely in Provence.", None)]),
            ]),
            ("salvia", "Salvia", 0.6, [
                ("description", 0.7, [("Salvia is a large genus of plants in the mint family.", None),
                                      ("Many salvias have blue or purple flowers.", None)]),
            ]),
        ],
        "gt": ("lavender", "description"),
    },
    {
        "id": "s07",
        "question": "Which sport is being played in this image?",
        "q_star": "Which sport are the players in white clothing playing in the image?",
        "answer": "Cricket",
        "priors": [("Baseball", 0.5)],
        "candidates": ["Cricket", "Baseball"],
        "parametric": ["Players in white clothing stand on a green field.", "One player holds a flat bat."],
        "parametric_pins": [0.6, 0.2],
        "rvis": "flat bat; white clothing; wicket",
        "entries": [
            ("cricket", "Cricket", 0.9, [
                ("description", 0.9, [("Cricket is a bat-and-ball game played between two teams of eleven players.", 0.9),
                                      ("The bowler delivers the ball towards the wicket.", None)]),
                ("laws", 0.8, [("A match is divided into innings.", None),
                               ("Each innings ends when ten batters are out.", None)]),
            ]),
            ("rounders", "Rounders", 0.6, [
                ("description", 0.7, [("Rounders is a bat-and-ball game played in schools.", None),
                                      ("Players run around four bases.", None)]),
            ]),
        ],
        "gt": ("cricket", "description"),
    },
    {
        "id": "s08",
        "question": "Which genus does this white mushroom growing in grass belong to?",
        "q_star": "Which genus does the white mushroom with a ring on its stem in the image belong to?",
        "answer": "Agaricus",
        "priors": [("Chlorophyllum", 2.5)],
        "candidates": ["Agaricus", "Chlorophyllum"],
        "parametric": ["The mushroom in the image has a white cap and a ring on the stem.", "It grows in a lawn."],
        "parametric_pins": [0.8, 0.2],
        "rvis": "ring on the stem; white cap; gill colour",
        "attributes": ["ring on the stem"],
        "entries": [
            ("agaricus", "Agaricus", 0.9, [
                ("description", 0.9, [("Agaricus mushrooms have a ring on the stem.", 0.9),
                                      ("Their gills turn brown with age.", 0.3)]),
            ]),
            ("chlorophyllum_molybdites", "Chlorophyllum molybdites", 0.8, [
                ("description", 0.8, [("Chlorophyllum molybdites has a scaly white cap.", 0.1),
                                      ("Its spores are green.", None)]),
            ]),
            ("lepiota", "Lepiota", 0.6, [
                ("description", 0.7, [("Lepiota species are small mushrooms with scaly caps.", None),
                                      ("Several of them are poisonous.", None)]),
            ]),
        ],
        "gt": ("agaricus", "description"),
    },
    {
        "id": "s09",
        "question": "What is the name of this castle on a hill?",
        "q_star": "What is the name of the white castle with tall towers on the hill in the image?",
        "answer": "Neuschwanstein",
        "priors": [("Hohenzollern", 0.5)],
        "candidates": ["Neuschwanstein", "Lichtenstein", "Hohenzollern"],
        "parametric": ["The image shows a white castle with tall towers on a hill.", "Forests surround the castle."],
        "parametric_pins": [0.3, 0.3],
        "rvis": "white limestone walls; slender towers",
        "entries": [
            ("lichtenstein_castle", "Lichtenstein Castle", 0.9, [
                ("description", 0.9, [("Lichtenstein Castle stands on a cliff above the Echaz valley.", 0.1),
                                      ("Lichtenstein Castle is in Baden-Wurttemberg.", 0.1)]),
                ("history", 0.8, [("Lichtenstein was rebuilt in the Gothic Revival style in 1840.", 0.1),
                                  ("The castle resembles a fairy tale.", None)]),
            ]),
            ("neuschwanstein", "Neuschwanstein Castle", 0.8, [
                ("description", 0.7, [("Neuschwanstein is a palace on a rugged hill in Bavaria.", 0.9),
                                      ("Neuschwanstein was commissioned by King Ludwig II.", 0.85)]),
            ]),
            ("hohenzollern_castle", "Hohenzollern Castle", 0.6, [
                ("description", 0.6, [("Hohenzollern Castle is the ancestral seat of a royal house.", None),
                                      ("It sits on Mount Hohenzollern.", None)]),
            ]),
        ],
        "gt": ("neuschwanstein", "description"),
    },
    {
        "id": "s10",
        "question": "What is the name of this bridge over a river?",
        "q_star": "What is the name of the bridge with two stone towers shown in the image?",
        "answer": "Tower Bridge",
        "priors": [("London Bridge", 1.2)],
        "candidates": ["Tower Bridge", "London Bridge"],
        "parametric": ["The image shows a bridge with two tall stone towers.", "A road passes between the towers."],
        "parametric_pins": [0.5, 0.2],
        "rvis": "two stone towers; high walkways",
        "entries": [
            ("tower_bridge", "Tower Bridge", 0.9, [
                ("description", 0.9, [("Tower Bridge is a combined bascule and suspension bridge in London.", 0.9),
                                      ("Its two towers are linked by high walkways.", 0.4)]),
            ]),
            ("river_thames", "River Thames", 0.7, [
                ("description", 0.8, [("The River Thames flows through southern England.", None),
                                      ("Many bridges cross the river in the capital.", None)]),
            ]),
            ("tower_of_london", "Tower of London", 0.6, [
                ("description", 0.7, [("The Tower of London is a historic castle on the north bank.", None),
                                      ("It was founded in 1066.", None)]),
            ]),
        ],
        "gt": ("tower_bridge", "description"),
    },
]


def dump_jsonl(path, rows):
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows), encoding="utf-8")


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    kb, queries, gt = [], [], []
    anchors, image_pins, text_pins, rules = [], [], [], []
    candidates, priors, attributes = [], [], {}
    for s in SCENARIOS:
        sid, q = s["id"], s["question"]
        image = f"img/{sid}.jpg"
        anchors.append(sid)
        queries.append({"qid": sid, "image": image, "question": q, "answers": [s["answer"]]})
        gt.append({"qid": sid, "entity_id": s["gt"][0], "section_id": s["gt"][1]})
        image_pins.append({"ref": image, "anchor": sid, "score": 1.0})
        text_pins.append({"text": q, "anchor": sid, "score": 1.0})
        text_pins.append({"text": s["q_star"], "anchor": sid, "score": 1.0})
        for sentence, score in zip(s["parametric"], s["parametric_pins"]):
            text_pins.append({"text": sentence, "anchor": sid, "score": score})
        for entity, title, image_score, sections in s["entries"]:
            entry_image = f"img/kb/{entity}.jpg"
            image_pins.append({"ref": entry_image, "anchor": sid, "score": image_score})
            rows = []
            for section_id, section_score, sentences in sections:
                text = " ".join(t for t, _ in sentences)
                rows.append({"id": section_id, "text": text})
                text_pins.append({"text": text, "anchor": sid, "score": section_score})
                for t, score in sentences:
                    if score is not None:
                        text_pins.append({"text": t, "anchor": sid, "score": score})
            kb.append({"entity_id": entity, "title": title, "image": entry_image, "sections": rows})
        rules += [
            {"match": f"Here is the question: {q} Please describe", "response": " ".join(s["parametric"])},
            {"match": f"Original question: {q}", "response": f"<question>{s['q_star']}</question>"},
            {"match": f"Here is the question: {q}, Here is the selected section:",
             "response": f"The section is consistent with the image. <reason>{s['rvis']}</reason>"},
            {"match": f"Here is the question: {q}. Below are the reasons",
             "response": f"<reason>{s['rvis']}</reason>"},
        ]
        for c in s["candidates"]:
            if c not in candidates:
                candidates.append(c)
        for answer, strength in s["priors"]:
            priors.append({"trigger": image, "answer": answer, "strength": strength})
        if "attributes" in s:
            attributes[image] = s["attributes"]

    kb.sort(key=lambda e: e["entity_id"])
    dump_jsonl(OUT / "kb.jsonl", kb)
    dump_jsonl(OUT / "queries.jsonl", queries)
    dump_jsonl(OUT / "gt.jsonl", gt)
    bundle = {
        "dimension": 64,
        "anchors": anchors,
        "image_pins": image_pins,
        "text_pins": text_pins,
        "vlm": {"rules": rules, "fallback": "<reason>no distinguishing feature</reason>"},
        "lm": {"candidates": candidates, "priors": priors, "image_attributes": attributes,
               "feature_gain": 1.5, "floor_logit": -8.0},
    }
    (OUT / "stub.json").write_text(json.dumps(bundle, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    config = {
        "mode": "ccvqa", "stub": True, "kb": "data/scenarios/kb.jsonl", "queries": "data/scenarios/queries.jsonl",
        "ground_truth": "data/scenarios/gt.jsonl", "stub_bundle": "data/scenarios/stub.json",
        "lm": {"kind": "scenario"}, "max_tokens": 32, "workers": 1,
    }
    (OUT / "config.json").write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
