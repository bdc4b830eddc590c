// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <set>

#include "cnt/dataset.hpp"

using namespace cnt;

namespace {

std::vector<std::uint8_t> be32(std::uint32_t v) {
  return {static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 8),
          static_cast<std::uint8_t>(v)};
}

std::vector<std::uint8_t> cat(std::initializer_list<std::vector<std::uint8_t>> parts) {
  std::vector<std::uint8_t> out;
  for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

}  // namespace

TEST(Csv, NormalizesEachColumnToUnitRange) {
  const auto d = parse_dataset_csv("a,b,c,label\n0,5,3,1\n4,5,1,0\n2,5,2,2\n");
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d.class_count, 3u);
  EXPECT_EQ(d.inputs(0, 0), 0.0);
  EXPECT_EQ(d.inputs(1, 0), 1.0);
  EXPECT_EQ(d.inputs(2, 0), 0.5);
  EXPECT_EQ(d.inputs(0, 1), 0.0);  // constant column
  EXPECT_EQ(d.inputs(0, 2), 1.0);
  EXPECT_EQ(d.labels, (std::vector<std::size_t>{1, 0, 2}));
}

TEST(Csv, MalformedRows) {
  EXPECT_THROW(parse_dataset_csv(""), FormatError);
  EXPECT_THROW(parse_dataset_csv("a,label\n1,2,3\n"), FormatError);
  EXPECT_THROW(parse_dataset_csv("a,label\n1,x\n"), FormatError);
  EXPECT_THROW(parse_dataset_csv("a,label\n1,1.5\n"), FormatError);
  EXPECT_THROW(parse_dataset_csv("a,label\n"), FormatError);
}

TEST(Bundled, DigitsShapeAndRange) {
  const auto d = load_bundled_digits();
  EXPECT_EQ(d.size(), 1797u);
  EXPECT_EQ(d.dim(), 64u);
  EXPECT_EQ(d.class_count, 10u);
  EXPECT_NO_THROW(validate(d));
}

TEST(Split, FixedEightyTwenty) {
  const auto d = load_bundled_digits();
  const auto [train, eval] = split_train_eval(d);
  EXPECT_EQ(train.size() + eval.size(), d.size());
  EXPECT_EQ(eval.size(), 359u);
  EXPECT_EQ(eval.labels[0], d.labels[4]);
  EXPECT_EQ(train.labels[4], d.labels[5]);
  const std::set<std::size_t> classes(eval.labels.begin(), eval.labels.end());
  EXPECT_EQ(classes.size(), 10u);
  EXPECT_EQ(split_train_eval(d), split_train_eval(d));
}

TEST(Validate, RejectsOutOfRangeInputsAndLabels) {
  Dataset d{Matrix(1, 2, std::vector<double>{0.5, 1.5}), {0}, 2};
  EXPECT_THROW(validate(d), ValidationError);
  d.inputs(0, 1) = 1.0;
  EXPECT_NO_THROW(validate(d));
  d.labels[0] = 2;
  EXPECT_THROW(validate(d), ValidationError);
  EXPECT_THROW(validate(Dataset{}), ValidationError);
}

TEST(Idx, ParsesImagesAndLabels) {
  const auto images = cat({be32(0x803), be32(2), be32(2), be32(2), {0, 255, 51, 102, 255, 0, 0, 0}});
  const auto labels = cat({be32(0x801), be32(2), {3, 7}});
  const auto d = parse_idx(images, labels);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d.dim(), 4u);
  EXPECT_EQ(d.inputs(0, 1), 1.0);
  EXPECT_EQ(d.inputs(0, 2), 0.2);
  EXPECT_EQ(d.labels, (std::vector<std::size_t>{3, 7}));
  EXPECT_EQ(d.class_count, 8u);
}

TEST(Idx, BadMagicAndSizes) {
  const auto images = cat({be32(0x803), be32(1), be32(1), be32(2), {1, 2}});
  const auto labels = cat({be32(0x801), be32(1), {0}});
  EXPECT_NO_THROW(parse_idx(images, labels));
  EXPECT_THROW(parse_idx(labels, labels), FormatError);
  EXPECT_THROW(parse_idx(images, images), FormatError);
  auto short_images = images;
  short_images.pop_back();
  EXPECT_THROW(parse_idx(short_images, labels), FormatError);
  const auto two_labels = cat({be32(0x801), be32(2), {0, 1}});
  EXPECT_THROW(parse_idx(images, two_labels), FormatError);
}

TEST(Blobs, DeterministicAndInRange) {
  BlobSpec spec{3, 5, 20, 0.3, 9};
  const auto a = gaussian_blobs(spec);
  EXPECT_EQ(a, gaussian_blobs(spec));
  EXPECT_EQ(a.size(), 60u);
  EXPECT_NO_THROW(validate(a));
  spec.seed = 10;
  EXPECT_NE(a, gaussian_blobs(spec));
}
