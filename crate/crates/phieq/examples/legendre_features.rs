use phieq::deviations::{binomial, identity_params, legendre, multi_indices, FeatureMap};

fn main() -> phieq::Result<()> {
    for l in 0..4 {
        println!("P_{l}(0.5) = {}", legendre(l, 0.5));
    }
    let (d, degree) = (2, 2);
    let indices = multi_indices(d, degree);
    println!(
        "{} non-constant monomials of degree <= {degree} in {d} variables: {indices:?}",
        binomial(d + degree, d) - 1
    );

    let fm = FeatureMap::legendre(d, degree, 1.0)?;
    let x = [0.3, -0.6];
    println!("m({x:?}) = {:?}", fm.eval(&x)?);
    let id = identity_params(&fm)?;
    println!("identity deviation maps {x:?} to {:?}", id.apply(&fm, &x)?);
    println!("parameters: {} ({} features)", fm.param_dim(), fm.output_dim());
    Ok(())
}
