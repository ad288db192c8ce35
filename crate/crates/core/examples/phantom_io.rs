//! Generate a synthetic case, write it to disk and read it back.

use voxelforge::volio::{
    generate_phantom, labelmap_to_regions, read_segvol, write_segvol, Region, SegVol,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (image, labels) = generate_phantom(7, [32, 32, 32])?;
    println!(
        "{} channels of {:?} voxels, spacing {:?}",
        image.channels(),
        image.spatial(),
        image.spacing()
    );

    let dir = std::env::temp_dir().join("voxelforge-phantom-io");
    std::fs::create_dir_all(&dir)?;
    let img_path = dir.join("case.segv");
    let lab_path = dir.join("case_labels.segv");
    write_segvol(&SegVol::Image(image.clone()), &img_path)?;
    write_segvol(&SegVol::Labels(labels.clone()), &lab_path)?;

    let back = read_segvol(&img_path)?.into_image()?;
    let back_labels = read_segvol(&lab_path)?.into_labels()?;
    assert_eq!(back, image);
    assert_eq!(back_labels, labels);

    let regions = labelmap_to_regions(&labels);
    for r in Region::ALL {
        let n = regions.get(r).iter().filter(|&&b| b).count();
        println!("{r:?}: {n} voxels");
    }
    println!("round trip ok under {}", dir.display());
    Ok(())
}
