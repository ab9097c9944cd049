#include <gtest/gtest.h>

#include <random>

#include "autoresearch/codeblock_extractor.hpp"

using namespace autoresearch;

TEST(Extract, NoFenceKeepsWholeText) {
    const std::string text = "import os\nprint(os.getcwd())";
    GeneratedScript s = extract(text);
    EXPECT_EQ(s.extraction, Extraction::whole_text);
    EXPECT_EQ(s.source, text);
    EXPECT_EQ(s.block_count, 0);
}

TEST(Extract, SingleBlockWithProse) {
    GeneratedScript s = extract("Here you go:\n```python\nx = 1\nprint(x)\n```\nHope it helps.", Stage::Repair);
    EXPECT_EQ(s.extraction, Extraction::fenced);
    EXPECT_EQ(s.source, "x = 1\nprint(x)\n");
    EXPECT_EQ(s.origin_stage, Stage::Repair);
    EXPECT_EQ(s.language_tags, std::vector<std::string>{"python"});
}

TEST(Extract, MultipleBlocksJoinedWithBlankLine) {
    GeneratedScript s = extract("```python\na = 1\n```\ntext\n```\nb = 2\n```\n");
    EXPECT_EQ(s.block_count, 2);
    EXPECT_EQ(s.source, "a = 1\n\nb = 2\n");
    EXPECT_EQ(s.language_tags, (std::vector<std::string>{"python", ""}));
}

TEST(Extract, UnterminatedFenceRunsToEnd) {
    EXPECT_EQ(extract("```python\nprint(1)\nprint(2)").source, "print(1)\nprint(2)\n");
}

TEST(Extract, LinesKeptVerbatim) {
    EXPECT_EQ(extract("```\n    indented  \n\n\ttab\n```").source, "    indented  \n\n\ttab\n");
}

TEST(Extract, BlankOutputRejected) {
    EXPECT_THROW(extract(""), EmptyExtraction);
    EXPECT_THROW(extract("  \n\t"), EmptyExtraction);
    EXPECT_THROW(extract("```python\n\n```"), EmptyExtraction);
}

// Property check: documents built from random prose and code blocks extract
// to the hand-concatenated blocks, and every block line is a line of the input.
TEST(Extract, RandomizedDocumentsMatchOracle) {
    std::mt19937 rng(20240611);
    const std::vector<std::string> prose{"Sure, here is the code.", "", "Note: run with python3.", "Explanation follows"};
    const std::vector<std::string> code{"import math", "x = [1, 2, 3]", "    return x  ", "", "print(f\"{x}\")", "# comment"};
    for (int c = 0; c < 50; ++c) {
        std::string doc;
        std::string oracle;
        const int blocks = 1 + static_cast<int>(rng() % 4);
        for (int b = 0; b < blocks; ++b) {
            doc += prose[rng() % prose.size()] + "\n";
            doc += (rng() % 2 ? "```python\n" : "```\n");
            std::string block;
            const int lines = 1 + static_cast<int>(rng() % 5);
            for (int l = 0; l < lines; ++l) block += code[rng() % code.size()] + "\n";
            block += "done()\n";  // never blank
            doc += block + "```\n";
            if (b > 0) oracle += "\n";
            oracle += block;
        }
        GeneratedScript s = extract(doc);
        EXPECT_EQ(s.source, oracle) << doc;
        EXPECT_EQ(s.block_count, blocks);
    }
}
