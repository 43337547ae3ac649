#include "intentaug/synthetic.hpp"

#include <array>
#include <map>
#include <random>
#include <string_view>
#include <vector>

#include "intentaug/error.hpp"

namespace intentaug {
namespace {

using Pool = std::vector<std::string_view>;

const Pool kCities = {"boston",  "new york", "denver",   "san francisco", "chicago",  "seattle",
                      "miami",   "dallas",   "atlanta",  "portland",      "las vegas", "salt lake city",
                      "phoenix", "detroit",  "new orleans", "austin"};
const Pool kDates = {"monday", "tuesday", "friday",       "saturday",   "tomorrow", "tonight",
                     "next week", "this weekend", "june first", "the fifth", "sunday morning"};
const Pool kAirlines = {"delta", "united", "american airlines", "jetblue", "southwest"};
const Pool kConditions = {"rain", "snow", "sunny", "windy", "cold"};
const Pool kHotels = {"hilton", "marriott", "holiday inn", "hyatt"};
const Pool kCuisines = {"italian", "thai", "sushi", "mexican", "indian"};
const Pool kCounts = {"two", "three", "four", "five"};
const Pool kFillers = {"please", "now", "for me", "if you can", "quickly", "thanks", "right away"};
const Pool kOpeners = {"hey", "can you", "i would like to", "um", "okay"};

const std::map<std::string_view, const Pool*> kPools = {
    {"city", &kCities},       {"date", &kDates},       {"airline", &kAirlines}, {"condition", &kConditions},
    {"hotel", &kHotels},      {"cuisine", &kCuisines}, {"count", &kCounts}};

struct IntentSpec {
  std::string_view name;
  std::string_view city_label;
  std::string_view date_label;
  std::vector<std::string_view> cues;       // may hold intent-specific slots
  std::vector<std::string_view> templates;  // complete intent-specific utterances
};

// `{pool:label}` is a slot; `{city}` and `{date}` take the intent's label.
const std::array<IntentSpec, 4> kIntents = {{
    {"BookFlight", "toloc", "depart_date",
     {"book a flight", "find flights", "i need a plane ticket", "show me {airline:airline} flights", "get me a seat"},
     {"fly me from {city:fromloc} to {city} on {date}", "i need a {airline:airline} flight to {city} {date}",
      "are there flights leaving {city:fromloc} {date}", "show me {airline:airline} flights to {city}"}},
    {"GetWeather", "weather_city", "weather_date",
     {"what is the weather", "tell me the forecast", "will it {condition:condition}", "check the weather",
      "how hot is it"},
     {"will it be {condition:condition} in {city} {date}", "forecast for {city} {date}",
      "is it going to {condition:condition} {date}", "weather report for {city}"}},
    {"BookHotel", "hotel_city", "checkin_date",
     {"book a room", "find a hotel", "reserve a {hotel:hotel_name} room", "i need lodging", "get me a suite"},
     {"i want to stay at the {hotel:hotel_name} in {city}", "reserve a hotel in {city} {date} for {count:nights} nights",
      "book {count:nights} nights at the {hotel:hotel_name}", "any rooms free in {city} {date}"}},
    {"FindRestaurant", "restaurant_city", "reservation_date",
     {"find a {cuisine:cuisine} restaurant", "book a table for {count:party_size}", "where can i eat",
      "i want dinner", "get me a reservation"},
     {"find {cuisine:cuisine} food in {city} {date}", "table for {count:party_size} in {city} {date}",
      "where can i eat {cuisine:cuisine} food", "best {cuisine:cuisine} place near {city}"}},
}};

// Bodies shared by every intent.
const std::vector<std::string_view> kSharedBodies = {
    "in {city} {date}", "for {city} on {date}", "around {city}", "near {city} {date}", "in {city}",
    "{date} in {city}", "at {city} for {date}", "{city} {date}"};

template <typename T>
const T& pick(const std::vector<T>& items, std::mt19937_64& rng) {
  return items[std::uniform_int_distribution<std::size_t>(0, items.size() - 1)(rng)];
}

void append_words(std::string_view text, const std::string& label, LabeledUtterance& out) {
  bool first = true;
  for (auto& w : split_tokens(text)) {
    out.tokens.push_back(std::move(w));
    out.slot_tags.push_back(label.empty() ? "O" : (first ? "B-" : "I-") + label);
    first = false;
  }
}

struct Draw {
  const IntentSpec& intent;
  std::size_t intent_index;
  std::size_t pairings;  // 0 means unrestricted
  double bias;
};

// Values of an intent-labelled pool allowed under `draw`.
std::string_view pick_value(const Pool& pool, const Draw& draw, std::mt19937_64& rng) {
  if (draw.pairings == 0 || !std::bernoulli_distribution(draw.bias)(rng)) return pick(pool, rng);
  std::vector<std::string_view> allowed;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if ((i + draw.intent_index) % kIntents.size() < draw.pairings) allowed.push_back(pool[i]);
  }
  return pick(allowed, rng);
}

void expand(std::string_view pattern, const Draw& draw, std::mt19937_64& rng, LabeledUtterance& out) {
  const auto& intent = draw.intent;
  std::size_t pos = 0;
  while (pos < pattern.size()) {
    const auto open = pattern.find('{', pos);
    append_words(pattern.substr(pos, open == std::string_view::npos ? std::string_view::npos : open - pos), "", out);
    if (open == std::string_view::npos) break;
    const auto close = pattern.find('}', open);
    const auto slot = pattern.substr(open + 1, close - open - 1);
    const auto colon = slot.find(':');
    const auto pool = slot.substr(0, colon);
    std::string label;
    if (colon != std::string_view::npos) label = slot.substr(colon + 1);
    else if (pool == "city") label = intent.city_label;
    else if (pool == "date") label = intent.date_label;
    const Pool& values = *kPools.at(pool);
    append_words(label.empty() || colon != std::string_view::npos ? pick(values, rng) : pick_value(values, draw, rng),
                 label, out);
    pos = close + 1;
  }
}

LabeledUtterance sample(const SyntheticOptions& options, std::size_t pairings, std::mt19937_64& rng) {
  const auto index = std::uniform_int_distribution<std::size_t>(0, kIntents.size() - 1)(rng);
  const auto& intent = kIntents[index];
  const Draw draw{intent, index, pairings, options.train_pairing_bias};
  LabeledUtterance u;
  u.intent = intent.name;
  std::bernoulli_distribution coin(0.5);
  if (std::bernoulli_distribution(options.shared_body_ratio)(rng)) {
    if (coin(rng)) expand(pick(kOpeners, rng), draw, rng, u);
    expand(pick(intent.cues, rng), draw, rng, u);
    if (coin(rng)) expand(pick(kFillers, rng), draw, rng, u);
    expand(pick(kSharedBodies, rng), draw, rng, u);
  } else {
    expand(pick(intent.templates, rng), draw, rng, u);
  }
  if (coin(rng)) expand(pick(kFillers, rng), draw, rng, u);
  return u;
}

Corpus make_split(std::string name, std::size_t n, const SyntheticOptions& options, std::size_t pairings,
                  std::mt19937_64& rng) {
  Corpus c;
  c.split = std::move(name);
  c.utterances.reserve(n);
  for (std::size_t i = 0; i < n; ++i) c.utterances.push_back(sample(options, pairings, rng));
  return c;
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticOptions& options) {
  if (options.train_size == 0 || options.dev_size == 0 || options.test_size == 0) {
    throw ConfigError("synthetic split sizes must be positive");
  }
  if (options.shared_body_ratio < 0 || options.shared_body_ratio > 1) {
    throw ConfigError("synthetic shared_body_ratio must lie in [0, 1]");
  }
  if (options.train_pairings == 0) throw ConfigError("synthetic train_pairings must be positive");
  if (options.train_pairing_bias < 0 || options.train_pairing_bias > 1) {
    throw ConfigError("synthetic train_pairing_bias must lie in [0, 1]");
  }
  std::mt19937_64 rng(options.seed);
  SyntheticCorpus out;
  const std::size_t restricted = options.train_pairings >= kIntents.size() ? 0 : options.train_pairings;
  out.train = make_split("train", options.train_size, options, restricted, rng);
  out.dev = make_split("dev", options.dev_size, options, 0, rng);
  out.test = make_split("test", options.test_size, options, 0, rng);
  return out;
}

std::set<std::string> intent_dependent_words(const Corpus& corpus) {
  std::map<std::string, std::set<std::string>> seen;
  for (const auto& u : corpus.utterances) {
    for (std::size_t i = 0; i < u.tokens.size(); ++i) {
      const auto& tag = u.slot_tags[i];
      seen[u.tokens[i]].insert(tag == "O" ? tag : tag.substr(2));
    }
  }
  std::set<std::string> out;
  for (const auto& [word, labels] : seen) {
    if (labels.size() > 1) out.insert(word);
  }
  return out;
}

Corpus filter_containing(const Corpus& corpus, const std::set<std::string>& words) {
  Corpus out;
  out.split = corpus.split;
  out.casing = corpus.casing;
  for (const auto& u : corpus.utterances) {
    for (const auto& t : u.tokens) {
      if (words.contains(t)) {
        out.utterances.push_back(u);
        break;
      }
    }
  }
  return out;
}

}  // namespace intentaug
