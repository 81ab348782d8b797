#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>

#include <gtest/gtest.h>

#include "red/dataset.hpp"
#include "red/envs.hpp"
#include "red/error.hpp"

namespace red {
namespace {

namespace fs = std::filesystem;

std::string kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return "none";
}

class DatasetFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("red_dataset_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

TEST(OneHot, Examples) {
  EXPECT_EQ(one_hot(1, 3), (Vector(3) << 0, 1, 0).finished());
  EXPECT_EQ(kind_of([] { one_hot(3, 3); }), "InvalidAction");
  EXPECT_EQ(kind_of([] { one_hot(-1, 2); }), "InvalidAction");
}

TEST(JointInput, StateThenAction) {
  const Vector s = (Vector(1) << 0.3).finished();
  EXPECT_EQ(joint_input(s, one_hot(0, 2)), (Vector(3) << 0.3, 1, 0).finished());
}

TEST(ExpertDatasetShape, JointInputsAndIndices) {
  const ExpertDataset d = generate_expert_dataset(EnvKind::simple, 4, 1);
  const Matrix x = d.joint_inputs();
  ASSERT_EQ(x.rows(), 3);
  ASSERT_EQ(x.cols(), 4);
  for (Eigen::Index i = 0; i < 4; ++i) {
    EXPECT_EQ(x(0, i), d.states(0, i));
    EXPECT_EQ(x(1 + d.action_index(i), i), 1.0);
  }
}

TEST(ExpertDatasetShape, ValidateErrors) {
  ExpertDataset d = generate_expert_dataset(EnvKind::simple, 3, 1);
  ExpertDataset mismatch = d;
  mismatch.actions = Matrix::Zero(2, 2);
  EXPECT_EQ(kind_of([&] { mismatch.validate(); }), "ShapeMismatch");
  ExpertDataset width = d;
  width.actions = Matrix::Zero(3, 3);
  EXPECT_EQ(kind_of([&] { width.validate(); }), "ShapeMismatch");
  ExpertDataset empty = d;
  empty.states.resize(1, 0);
  empty.actions.resize(2, 0);
  EXPECT_EQ(kind_of([&] { empty.validate(); }), "EmptyDataset");
  d.states(0, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(kind_of([&] { d.validate(); }), "NonFiniteInput");
}

TEST_F(DatasetFiles, RoundTripIsExact) {
  for (EnvKind kind : {EnvKind::simple, EnvKind::grid}) {
    const ExpertDataset d = generate_expert_dataset(kind, 7, 123);
    const fs::path path = dir_ / (std::string(to_string(kind)) + ".csv");
    save_dataset(d, path);
    ASSERT_TRUE(fs::exists(dataset_meta_path(path)));
    const ExpertDataset back = load_dataset(path);
    EXPECT_EQ(back.states, d.states);
    EXPECT_EQ(back.actions, d.actions);
    EXPECT_EQ(back.action_space, d.action_space);
    EXPECT_EQ(back.seed, d.seed);
    EXPECT_EQ(back.source, d.source);
  }
}

TEST_F(DatasetFiles, HeaderNamesColumns) {
  const fs::path path = dir_ / "d.csv";
  save_dataset(generate_expert_dataset(EnvKind::grid, 1, 0), path);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "s_0,s_1,a_enc_0,a_enc_1,a_enc_2,a_enc_3");
}

TEST_F(DatasetFiles, MissingFiles) {
  EXPECT_EQ(kind_of([&] { load_dataset(dir_ / "nope.csv"); }), "DatasetNotFound");
  const fs::path path = dir_ / "d.csv";
  save_dataset(generate_expert_dataset(EnvKind::simple, 2, 0), path);
  fs::remove(dataset_meta_path(path));
  EXPECT_EQ(kind_of([&] { load_dataset(path); }), "DatasetNotFound");
}

TEST_F(DatasetFiles, MalformedContent) {
  const fs::path path = dir_ / "d.csv";
  save_dataset(generate_expert_dataset(EnvKind::simple, 2, 0), path);

  std::ofstream(path) << "s_0,a_enc_0,a_enc_1\n0.5,abc,1\n";
  EXPECT_EQ(kind_of([&] { load_dataset(path); }), "InvalidDataset");

  std::ofstream(path) << "s_0,a_enc_0,a_enc_1\n0.5,0\n";
  EXPECT_EQ(kind_of([&] { load_dataset(path); }), "InvalidDataset");

  std::ofstream(path) << "s_0,a_enc_0,weird\n0.5,0,1\n";
  EXPECT_EQ(kind_of([&] { load_dataset(path); }), "InvalidDataset");

  std::ofstream(path) << "s_0,a_enc_0\n0.5,1\n";
  EXPECT_EQ(kind_of([&] { load_dataset(path); }), "InvalidDataset");

  std::ofstream(path) << "s_0,a_enc_0,a_enc_1\n";
  EXPECT_EQ(kind_of([&] { load_dataset(path); }), "EmptyDataset");

  std::ofstream(path) << "s_0,a_enc_0,a_enc_1\n0.5,0,1\n";
  std::ofstream(dataset_meta_path(path)) << "{not json";
  EXPECT_EQ(kind_of([&] { load_dataset(path); }), "InvalidDataset");
}

}  // namespace
}  // namespace red
