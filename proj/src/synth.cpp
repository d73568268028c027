// SPDX-License-Identifier: Apache-2.0
#include "shopsim/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "shopsim/errors.hpp"
#include "shopsim/rng.hpp"
#include "shopsim/text.hpp"

namespace shopsim {

namespace {

struct Vocabulary {
    const char* interest;
    const char* category;
    std::vector<const char*> nouns;
    std::vector<const char*> adjectives;
    double base_price;
};

const std::vector<Vocabulary>& vocabularies() {
    static const std::vector<Vocabulary> v = {
        {"Hiking", "Outdoors", {"Boots", "Backpack", "Trekking Poles", "Rain Jacket", "Water Filter"},
         {"Waterproof", "Lightweight", "Rugged", "Breathable", "Insulated"}, 60},
        {"Cooking", "Kitchen", {"Skillet", "Chef Knife", "Dutch Oven", "Spice Rack", "Cutting Board"},
         {"Cast Iron", "Nonstick", "Stainless", "Bamboo", "Ceramic"}, 35},
        {"Gaming", "Electronics", {"Controller", "Headset", "Keyboard", "Mouse Pad", "Gaming Chair"},
         {"Wireless", "RGB", "Ergonomic", "Mechanical", "Pro"}, 70},
        {"Fitness", "Sports", {"Yoga Mat", "Dumbbells", "Resistance Bands", "Jump Rope", "Foam Roller"},
         {"Adjustable", "Non-slip", "Heavy Duty", "Compact", "Premium"}, 30},
        {"Gardening", "Garden", {"Pruning Shears", "Planter", "Hose", "Seed Kit", "Garden Gloves"},
         {"Organic", "Expandable", "Self-watering", "Durable", "Raised"}, 25},
        {"Reading", "Books", {"Novel", "Paperback", "Book Light", "Bookends", "Reading Journal"},
         {"Bestselling", "Illustrated", "Classic", "Collector", "Pocket"}, 15},
        {"Photography", "Camera", {"Tripod", "Camera Bag", "Lens Filter", "Memory Card", "Ring Light"},
         {"Carbon", "Padded", "Polarized", "High Speed", "Dimmable"}, 55},
        {"Travel", "Luggage", {"Carry-on", "Packing Cubes", "Neck Pillow", "Passport Wallet", "Travel Adapter"},
         {"Hardshell", "Foldable", "Memory Foam", "RFID", "Universal"}, 40},
        {"Pets", "Pet Supplies", {"Dog Leash", "Cat Tree", "Pet Bed", "Chew Toy", "Food Bowl"},
         {"Reflective", "Plush", "Orthopedic", "Squeaky", "Slow Feed"}, 25},
        {"Music", "Instruments", {"Guitar Strings", "Ukulele", "Capo", "Metronome", "Keyboard Stand"},
         {"Acoustic", "Beginner", "Tunable", "Digital", "Studio"}, 45},
        {"Crafts", "Arts", {"Yarn", "Paint Set", "Glue Gun", "Sketchbook", "Sewing Kit"},
         {"Watercolor", "Mini", "Merino", "Acrylic", "Deluxe"}, 20},
        {"Baby", "Baby", {"Stroller", "Baby Monitor", "Diaper Bag", "Teether", "Swaddle"},
         {"Convertible", "Smart", "Waterproof", "Soothing", "Organic Cotton"}, 50},
    };
    return v;
}

const std::vector<const char*> kBrands = {"Northpeak", "Kestrel", "Blueoak", "Solvia", "Trailmark",
                                          "Everly", "Corvid", "Lumen", "Halden", "Maple & Co"};

const std::vector<const char*> kReviewTexts = {"Exactly as described.", "Good value for the money.",
                                               "Broke after a month.", "Would buy again.", "Decent but overpriced.",
                                               "Great quality, fast shipping."};

Catalog make_catalog(Rng& rng, std::size_t n) {
    const auto& vocab = vocabularies();
    std::vector<Product> products;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& v = vocab[i % vocab.size()];
        const std::string noun = v.nouns[rng.uniform_index(v.nouns.size())];
        const std::string adj = v.adjectives[rng.uniform_index(v.adjectives.size())];
        const std::string brand = kBrands[rng.uniform_index(kBrands.size())];
        const bool interest_in_title = rng.bernoulli(0.5);
        Product p;
        p.id = fmt::format("p{:04d}", i + 1);
        p.title = interest_in_title ? fmt::format("{} {} {} {}", brand, adj, v.interest, noun)
                                    : fmt::format("{} {} {}", brand, adj, noun);
        p.category = v.category;
        p.description = fmt::format("{} {} made for {} fans. Designed by {} for everyday use.", adj, to_lower(noun),
                                    to_lower(v.interest), brand);
        p.bullets = {fmt::format("{} build", adj), fmt::format("Backed by {} support", brand)};
        const double price = v.base_price * std::exp(0.6 * rng.normal());
        p.price = Money::from_dollars(std::clamp(std::round(price) - 0.01, 2.99, 999.99));
        const int n_reviews = rng.uniform_int(0, 3);
        for (int r = 0; r < n_reviews; ++r)
            p.reviews.push_back({rng.uniform_int(1, 5), kReviewTexts[rng.uniform_index(kReviewTexts.size())]});
        p.interest_tags = {v.interest};
        products.push_back(std::move(p));
    }
    return Catalog(std::move(products));
}

std::string make_query(Rng& rng, const Product& target, const Vocabulary& v) {
    // The title is "<brand> <adjective> [<interest>] <noun>"; queries use its tail.
    std::string noun;
    std::string adj;
    for (const char* n : v.nouns)
        if (target.title.size() >= std::string_view(n).size() &&
            target.title.compare(target.title.size() - std::string_view(n).size(), std::string::npos, n) == 0)
            noun = n;
    for (const char* a : v.adjectives)
        if (target.title.find(a) != std::string::npos && std::string_view(a).size() > adj.size()) adj = a;
    const double u = rng.uniform01();
    std::string q;
    if (u < 0.35)
        q = noun;
    else if (u < 0.75)
        q = adj + " " + noun;
    else
        q = std::string(v.interest) + " " + noun;
    return to_lower(q);
}

int geometric(Rng& rng, double p, int cap) {
    int k = 0;
    while (k < cap && !rng.bernoulli(p)) ++k;
    return k;
}

}  // namespace

SynthData generate_synthetic(const SynthOptions& o) {
    if (o.n_products < vocabularies().size() || o.n_customers == 0 || o.min_sessions <= 0 ||
        o.max_sessions < o.min_sessions || o.span_days <= 0)
        throw ValidationError("synthetic data options out of range");

    SynthData data;
    Rng catalog_rng(derive_seed(o.seed, "synth/catalog"));
    data.catalog = make_catalog(catalog_rng, o.n_products);
    const auto& vocab = vocabularies();
    for (const auto& v : vocab) data.interests.emplace_back(v.interest);

    std::vector<std::vector<const Product*>> by_interest(vocab.size());
    for (const auto& [id, p] : data.catalog.products()) {
        for (std::size_t k = 0; k < vocab.size(); ++k)
            if (p.interest_tags.front() == vocab[k].interest) by_interest[k].push_back(&p);
    }

    const auto last = std::chrono::sys_days(o.last_day);
    for (std::size_t c = 0; c < o.n_customers; ++c) {
        Rng rng(derive_seed(o.seed, "synth/customer", c));
        SynthShopper shopper;
        shopper.customer_id = fmt::format("c{:04d}", c + 1);
        std::vector<std::size_t> mine;
        const int n_interests = rng.bernoulli(0.5) ? 1 : 2;
        while (static_cast<int>(mine.size()) < n_interests) {
            const auto k = rng.uniform_index(vocab.size());
            if (std::find(mine.begin(), mine.end(), k) == mine.end()) mine.push_back(k);
        }
        for (auto k : mine) shopper.interests.emplace_back(vocab[k].interest);
        shopper.budget = std::vector<double>{30.0, 80.0, 250.0}[rng.uniform_index(3)];

        const int n_sessions = rng.uniform_int(o.min_sessions, o.max_sessions);
        std::set<int> offsets;
        while (static_cast<int>(offsets.size()) < std::min(n_sessions, o.span_days)) offsets.insert(rng.uniform_int(0, o.span_days - 1));
        for (auto it = offsets.rbegin(); it != offsets.rend(); ++it) {
            Session s;
            s.customer_id = shopper.customer_id;
            s.date = std::chrono::year_month_day(last - std::chrono::days(*it));
            Timestamp t = midnight_of(s.date) + rng.uniform_int(8 * 3600, 20 * 3600);
            const int n_searches = 1 + (rng.bernoulli(0.35) ? 1 : 0) + (rng.bernoulli(0.15) ? 1 : 0);
            for (int q = 0; q < n_searches; ++q) {
                const auto k = rng.bernoulli(0.85) ? mine[rng.uniform_index(mine.size())] : rng.uniform_index(vocab.size());
                const auto& pool = by_interest[k];
                const auto* target = pool[rng.uniform_index(pool.size())];
                const auto query = make_query(rng, *target, vocab[k]);
                const auto results = data.catalog.search(query, 10);
                if (results.empty()) continue;
                s.actions.push_back({ActionKind::Search, query, t});
                const int n_views = rng.bernoulli(0.15) ? 0 : 1 + geometric(rng, 0.55, 2);
                std::set<std::size_t> seen;
                bool bought = false;
                for (int v = 0; v < n_views; ++v) {
                    const auto rank = std::min<std::size_t>(static_cast<std::size_t>(geometric(rng, 0.45, 9)), results.size() - 1);
                    if (!seen.insert(rank).second) continue;
                    t += rng.bernoulli(0.7) ? rng.uniform_int(5, 55) : rng.uniform_int(61, 180);
                    const auto* viewed = results[rank];
                    s.actions.push_back({ActionKind::View, viewed->id, t});
                    if (!bought && viewed->price.dollars() <= shopper.budget && rng.bernoulli(0.35)) {
                        t += rng.uniform_int(30, 300);
                        s.actions.push_back({ActionKind::Purchase, viewed->id, t});
                        bought = true;
                    }
                }
                t += rng.uniform_int(20, 200);
            }
            if (!s.actions.empty()) data.sessions.push_back(std::move(s));
        }
        data.shoppers.push_back(std::move(shopper));
    }
    return data;
}

void write_synthetic(const SynthData& data, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_catalog(data.catalog, dir / "catalog.jsonl");
    save_sessions(data.sessions, dir / "sessions.jsonl");
    std::ofstream out(dir / "interests.txt");
    if (!out) throw ValidationError(fmt::format("cannot write '{}'", (dir / "interests.txt").string()));
    for (const auto& i : data.interests) out << i << '\n';
}

}  // namespace shopsim
