//! Regenerates the committed fixture files.

fn main() {
    let path = easg_testkit::fixtures::synthetic_dataset_path();
    let bytes = easg_core::formats::save_dataset(&easg_testkit::fixtures::synthetic_dataset());
    std::fs::write(&path, bytes).expect("write fixture");
    println!("wrote {}", path.display());
}
