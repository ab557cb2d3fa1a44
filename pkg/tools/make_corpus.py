"""Regenerate the bundled categorized prompt corpus (8 categories x 200 docs).

    python tools/make_corpus.py > src/xrouter/data/corpus.jsonl
"""
import json
import random
import sys

TOPICS = {
    0: """physics quantum particle electron photon energy experiment laboratory
        hypothesis molecule atom chemistry reaction catalyst spectrum wavelength
        telescope galaxy orbit gravity neutron relativity entropy thermodynamics
        researcher scientist measurement microscope cell protein genome enzyme
        isotope radiation magnetic field velocity acceleration equation theorem
        observation specimen compound crystal plasma fusion laser optics""",
    1: """football soccer basketball tennis match tournament championship league
        coach player team stadium goal score referee season playoff striker
        goalkeeper defender midfield sprint marathon athlete olympic medal
        trophy racket court pitch inning pitcher batter quarterback touchdown
        dribble penalty transfer fixture derby rookie veteran victory defeat""",
    2: """recipe cooking kitchen oven flour sugar butter garlic onion tomato
        sauce simmer bake roast fry chop whisk dough pastry spice pepper salt
        cinnamon vanilla chocolate dessert soup broth noodle pasta rice skillet
        saucepan ingredient tablespoon teaspoon marinade grill chef dinner
        lunch breakfast savory delicious flavor crispy tender herbs""",
    3: """market stock investor dividend portfolio interest inflation bond equity
        bank loan mortgage credit revenue profit earnings quarter shareholder
        valuation hedge fund asset liability budget deficit currency exchange
        trading broker futures commodity recession fiscal monetary capital
        tax audit accounting invoice payroll savings pension insurance""",
    4: """software computer algorithm database server cloud network programming
        developer code compiler processor memory storage cache laptop smartphone
        app interface browser encryption security cybersecurity firmware linux
        kernel api framework deployment container cluster bandwidth latency
        router wireless chip semiconductor robotics automation startup""",
    5: """travel flight airport hotel beach island resort passport luggage
        destination itinerary tourist sightseeing museum cathedral castle
        mountain hiking trail cruise ferry train station backpacking hostel
        vacation holiday booking reservation guide landmark coastline village
        scenic adventure excursion souvenir visa journey explore""",
    6: """health patient doctor hospital clinic disease symptom treatment therapy
        medicine vaccine infection diagnosis surgery nurse prescription dose
        nutrition diet exercise fitness wellness sleep stress anxiety blood
        pressure heart diabetes cancer immune chronic recovery physician
        pharmacy vitamin allergy injury rehabilitation""",
    7: """election government parliament senator congress president minister
        policy legislation vote campaign candidate party democracy constitution
        court judge lawsuit law regulation reform governor mayor diplomat
        treaty embassy sanction debate ballot referendum coalition opposition
        citizen rights protest administration agency federal municipal""",
}

FILLER = """people time year way day thing world life part place case week
    company system program question work number point home water room mother
    area money story fact month lot study book eye job word business issue side
    kind head house service friend father power hour game line end member law
    car city community name team minute idea kid body information back parent
    face others level office door person art war history party result change
    morning reason research girl guy moment air teacher force education good
    new first last long great little big high different small large next early
    young important public bad able says said think know take see come want
    look use find give tell work call try ask need feel become leave put mean
    keep let begin seem help talk turn start show hear play run move live
    believe bring happen write provide sit stand lose pay meet include continue
    set learn lead understand watch follow stop create speak read allow add
    spend grow open walk win offer remember love consider appear buy wait serve
    die send expect build stay fall cut reach kill remain suggest raise pass
    sell require report decide pull""".split()

STOP = "the a an of and to in is that it for on with as was by at from this".split()


def make_doc(rng: random.Random, cat: int, topics: dict[int, list[str]]) -> str:
    words = []
    n = rng.randint(40, 120)
    own = topics[cat]
    while len(words) < n:
        r = rng.random()
        if r < 0.55:
            words.append(rng.choice(own))
        elif r < 0.59:
            other = rng.choice([c for c in topics if c != cat])
            words.append(rng.choice(topics[other]))
        elif r < 0.80:
            words.append(rng.choice(FILLER))
        elif r < 0.97:
            words.append(rng.choice(STOP))
        else:
            words.append(str(rng.randint(2, 2024)))
    text = " ".join(words)
    return text[0].upper() + text[1:] + "."


def main() -> None:
    rng = random.Random(20240917)
    topics = {c: ws.split() for c, ws in TOPICS.items()}
    for cat in range(8):
        for _ in range(200):
            sys.stdout.write(json.dumps({"text": make_doc(rng, cat, topics), "category": cat}) + "\n")


if __name__ == "__main__":
    main()
