#include <catch2/catch_amalgamated.hpp>

#include "ccvqa/prompts.hpp"
#include "ccvqa/util.hpp"

using namespace ccvqa;
using namespace ccvqa::prompts;

namespace {

std::string golden(std::string_view name) {
  return read_file(std::string(CCVQA_SOURCE_DIR) + "/tests/golden/prompts/" + std::string(name) + ".txt");
}

}  // namespace

TEST_CASE("compiled templates match the golden files", "[prompts]") {
  for (const auto t : all_templates()) {
    INFO(asset_name(t));
    CHECK(std::string(text(t)) == golden(asset_name(t)));
    CHECK(std::string(text(t)) ==
          read_file(std::string(CCVQA_SOURCE_DIR) + "/data/prompts/" + std::string(asset_name(t)) + ".txt"));
  }
}

TEST_CASE("templates keep their original spelling", "[prompts]") {
  CHECK(contains(text(Template::visual_rationale), "for the asnwer related"));
  CHECK(contains(text(Template::conflict_analysis), "ldentify the key features"));
  CHECK(contains(text(Template::parametric_context), "by your own Knowledge."));
  CHECK(text(Template::final_answer).ends_with("Short Answer:"));
}

TEST_CASE("render substitutes known placeholders only", "[prompts]") {
  CHECK(render("a {x} b {y}", {{"x", "1"}}) == "a 1 b {y}");
  CHECK(render("{x}{x}", {{"x", "{x}"}}) == "{x}{x}");
  CHECK(render("open { brace", {{"x", "1"}}) == "open { brace");
  CHECK(render("{Reasons text}", {{"Reasons text", "r"}}) == "r");
}

TEST_CASE("rendered prompts", "[prompts]") {
  CHECK(parametric_context("What is this?") ==
        "Here is the question: What is this? Please describe the image about the question by your own Knowledge.");
  CHECK(question_rewrite("Q?").ends_with("Original question: Q?"));
  CHECK(visual_rationale("Q?", "Sec.") ==
        "Here is the question: Q?, Here is the selected section:Sec., Give your answer and put the feature or "
        "reason for the asnwer related to the image in <reason> </reason>.");
  CHECK(conflict_analysis("Q?", "r1\nr2").starts_with(
      "Here is the question: Q?. Below are the reasons supporting the answer derived from the retrieved "
      "information: r1\nr2. ldentify"));
  CHECK(final_answer("Q?", "F", "I") ==
        "Here is the question: Q?. Here is the feature to focus on: <reason>F </reason>. Here is the retrieved "
        "information: I. Short Answer:");
}

TEST_CASE("final-answer parts reassemble the rendered prompt", "[prompts]") {
  const auto p = final_answer_parts("Q?");
  CHECK(p.before_features + "F" + p.between + "I" + p.after == final_answer("Q?", "F", "I"));
  CHECK(p.after == ". Short Answer:");
}

TEST_CASE("vanilla and parametric prompts drop the feature clause", "[prompts]") {
  const auto v = vanilla_answer_parts("Q?");
  CHECK(v.before_information + "I" + v.after ==
        "Here is the question: Q?. Here is the retrieved information: I. Short Answer:");
  CHECK(parametric_answer("Q?") == "Here is the question: Q?. Short Answer:");
}
