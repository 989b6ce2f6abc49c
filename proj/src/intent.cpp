#include "statebridge/intent.hpp"

#include <cctype>
#include <map>
#include <string>

#include "statebridge/error.hpp"

namespace statebridge {

TaskIntent parse_intent(std::string_view utterance) {
  static const std::map<std::string, ObjectCategory, std::less<>> kVocabulary = {
      {"water", ObjectCategory::Water},  {"drink", ObjectCategory::Water},
      {"bottle", ObjectCategory::Water}, {"chips", ObjectCategory::Chips},
      {"snack", ObjectCategory::Chips},  {"snacks", ObjectCategory::Chips},
      {"fruit", ObjectCategory::Fruit},  {"apple", ObjectCategory::Fruit},
      {"banana", ObjectCategory::Fruit}, {"orange", ObjectCategory::Fruit},
  };

  std::string word;
  auto flush = [&]() -> std::optional<ObjectCategory> {
    std::optional<ObjectCategory> hit;
    if (auto it = kVocabulary.find(word); it != kVocabulary.end()) hit = it->second;
    word.clear();
    return hit;
  };
  for (char ch : utterance) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalpha(c)) {
      word.push_back(static_cast<char>(std::tolower(c)));
      continue;
    }
    if (auto hit = flush()) return TaskIntent{*hit, "user", std::string(utterance)};
  }
  if (auto hit = flush()) return TaskIntent{*hit, "user", std::string(utterance)};
  throw Error(ErrorCode::NoIntent, "no known object in \"" + std::string(utterance) + "\"");
}

}  // namespace statebridge
