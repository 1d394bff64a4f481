use super::*;
use crate::network::Network;
use crate::patterns::PatternDescriptor;
use crate::semantics::{normalize, refines, Model};

const RINGBUFFER: &str = include_str!("../../../../models/ringbuffer.net");
const APHILS: &str = include_str!("../../../../models/aphils.net");
const APHILS_PATTERN: &str = include_str!("../../../../models/aphils.pattern.json");
const LEADER: &str = include_str!("../../../../models/leader-election.net");
const LEADER_PATTERN: &str = include_str!("../../../../models/leader-election.pattern.json");

fn load(src: &str) -> Network {
    load_network(src).unwrap_or_else(|e| panic!("{e}")).network
}

fn names(net: &Network) -> Vec<&str> {
    net.components.iter().map(|c| c.name.as_str()).collect()
}

#[test]
fn ringbuffer_elaborates() {
    let net = load(RINGBUFFER);
    assert_eq!(names(&net), ["Controller.0", "Cell.0", "Cell.1", "Cell.2"]);
    assert_eq!(net.components[0].alphabet.len(), 16);
    assert_eq!(net.fmt_events(&net.components[2].alphabet), "{read.1.0, read.1.1, write.1.0, write.1.1}");
    assert_eq!(net.compiled(1).unwrap().len(), 2);
}

#[test]
fn const_override_resizes_the_model() {
    let decl = parse_network(RINGBUFFER).unwrap();
    let net = elaborate_with(&decl, &[("NCELLS".into(), 5)]).unwrap().network;
    assert_eq!(net.len(), 6);
    let err = elaborate_with(&decl, &[("SIZE".into(), 5)]).unwrap_err();
    assert!(matches!(err, DslError::Invalid { .. }), "{err:?}");
}

#[test]
fn asymmetric_philosophers_elaborate() {
    let net = load(APHILS);
    assert_eq!(names(&net), ["Phil.0", "Phil.1", "APhil.2", "Fork.0", "Fork.1", "Fork.2"]);
    assert_eq!(net.fmt_events(&net.components[5].alphabet), "{pickup.1.2, pickup.2.2, putdown.1.2, putdown.2.2}");
}

#[test]
fn multi_parameter_atoms_take_tuples() {
    let net = load(LEADER);
    assert_eq!(names(&net), ["P.0", "P.1", "T.0.1", "T.1.0"]);
}

#[test]
fn empty_instance_set_warns() {
    let src = "channel a\nX = a -> X\natom A(i) : {a} = X\ninstance A : {}\ncomponent B : {a} = X\n";
    let el = load_network(src).unwrap();
    assert_eq!(el.network.len(), 1);
    assert_eq!(el.warnings.len(), 1);
    assert_eq!(el.warnings[0].severity, Severity::Warning);
}

#[test]
fn unknown_channel() {
    let err = load_network("channel a\nP = b -> P\ncomponent C : {a} = P\n").unwrap_err();
    assert!(matches!(err, DslError::UnknownChannel { ref name, pos } if name == "b" && pos.line == 2), "{err:?}");
}

#[test]
fn input_on_a_channel_without_that_field() {
    let err = load_network("channel a : {0, 1}\nP = a.0?x -> P\ncomponent C : {| a |} = P\n").unwrap_err();
    assert!(matches!(err, DslError::ChannelArity { arity: 1, field: 1, .. }), "{err:?}");
}

#[test]
fn duplicate_component_name() {
    let err = load_network("channel a\nP = a -> P\ncomponent C : {a} = P\ncomponent C : {a} = P\n").unwrap_err();
    assert!(matches!(err, DslError::DuplicateComponentName { ref name, .. } if name == "C"), "{err:?}");
}

#[test]
fn alphabet_must_be_events() {
    let err = load_network("channel a\nP = a -> P\ncomponent C : {1, 2} = P\n").unwrap_err();
    assert!(matches!(err, DslError::NonGroundAlphabet { ref component, .. } if component == "C"), "{err:?}");
}

#[test]
fn oversized_channels_are_rejected() {
    let err = load_network("channel a : {0..99999}.{0..99999}\ncomponent C : {} = STOP\n").unwrap_err();
    assert_eq!(err, DslError::RangeOverflow);
}

#[test]
fn syntax_errors_surface_as_diagnostics() {
    let err = load_network("channel a\nP = a -> \n").unwrap_err();
    let DslError::Syntax(ds) = err else { panic!("{err:?}") };
    assert_eq!(ds[0].pos.line, 3);
}

#[test]
fn printed_models_parse_back() {
    for (src, over) in [(RINGBUFFER, 3), (APHILS, 4), (LEADER, 3)] {
        let decl = parse_network(src).unwrap();
        let key = if src == RINGBUFFER { "NCELLS" } else { "N" };
        let net = elaborate_with(&decl, &[(key.into(), over)]).unwrap().network;
        let text = print_network(&net);
        let again = load_network(&text).unwrap_or_else(|e| panic!("{e}\n{text}")).network;
        assert_eq!(print_network(&again), text);
        assert_eq!(names(&again), names(&net));
        for i in 0..net.len() {
            assert_eq!(again.components[i].alphabet, net.components[i].alphabet);
            assert_eq!(again.compiled(i).unwrap().len(), net.compiled(i).unwrap().len());
        }
    }
}

#[test]
fn input_sugar_is_an_indexed_choice() {
    let src = "channel c : {0..2}\nchannel done\n\
               P(x) = c?y -> (y > x & done -> STOP [] y <= x & P(y))\n\
               Q(x) = [] y : {0..2} @ c.y -> (y > x & done -> STOP [] y <= x & Q(y))\n\
               component A : {| c, done |} = P(1)\n\
               component B : {| c, done |} = Q(1)\n";
    let net = load(src);
    let a = net.compiled(0).unwrap();
    let b = net.compiled(1).unwrap();
    for model in [Model::Failures, Model::Revivals] {
        assert!(refines(&normalize(&a).unwrap(), &b, model).unwrap().holds());
        assert!(refines(&normalize(&b).unwrap(), &a, model).unwrap().holds());
    }
}

#[test]
fn resource_allocation_descriptor() {
    let net = load(APHILS);
    let PatternDescriptor::ResourceAllocation(d) = parse_descriptor(APHILS_PATTERN, &net).unwrap() else { panic!() };
    let users: Vec<&str> = d.users.iter().map(|&u| net.name(u)).collect();
    let order: Vec<&str> = d.ra_order.iter().map(|&r| net.name(r)).collect();
    assert_eq!(users, ["Phil.0", "Phil.1", "APhil.2"]);
    assert_eq!(order, ["Fork.0", "Fork.1", "Fork.2"]);
    let echo = echo_descriptor(&PatternDescriptor::ResourceAllocation(d), &net);
    assert!(echo.contains("order(APhil.2) = <Fork.0, Fork.2>"), "{echo}");
}

#[test]
fn descriptor_names_must_exist() {
    let net = load(APHILS);
    let doc = APHILS_PATTERN.replace("\"ra_order\": [\"Fork.*\"]", "\"ra_order\": [\"Fork.0\", \"Fork.1\", \"Fork.9\"]");
    assert_eq!(parse_descriptor(&doc, &net), Err(DescriptorError::UnknownComponent("Fork.9".into())));
    let doc = APHILS_PATTERN.replace("\"version\": 1", "\"version\": 7");
    assert_eq!(parse_descriptor(&doc, &net), Err(DescriptorError::Version(7)));
}

#[test]
fn async_dynamic_descriptor() {
    let decl = parse_network(LEADER).unwrap();
    let net = elaborate_with(&decl, &[("N".into(), 3)]).unwrap().network;
    let PatternDescriptor::AsyncDynamic(d) = parse_descriptor(LEADER_PATTERN, &net).unwrap() else { panic!() };
    assert_eq!(d.links.len(), 6);
    assert_eq!(d.participants(), [0, 1, 2]);
    let p0: Vec<&str> = d.schedule[&0].iter().map(|&p| net.name(p)).collect();
    assert_eq!(p0, ["P.1", "P.2"]);
    let doc = LEADER_PATTERN.replace("P.peer(s, k)", "P.peer(s, 0)");
    let err = parse_descriptor(&doc, &net).unwrap_err();
    assert!(matches!(err, DescriptorError::DuplicateInSchedule { .. }), "{err:?}");
}
