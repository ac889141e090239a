from cli.base import PipelineCommand, as_json
from cli.forms import SampleForm
from dataset.index import DatasetIndex
from dataset.surgery import sample
from paralleleye.conf import pe_settings


class Command(PipelineCommand):
    help = "Draw a seeded random subset of n images."
    form_class = SampleForm

    def add_options(self, parser):
        parser.add_argument('dataset', nargs='?')
        parser.add_argument('--out', '-o')
        parser.add_argument('-n', type=int, dest='n', help="number of images")
        parser.add_argument('--seed', type=int)

    def run(self, cleaned):
        seed = pe_settings.SEED if cleaned.get('seed') is None else cleaned['seed']
        result = sample(DatasetIndex.load(cleaned['dataset']), cleaned['n'], seed)
        result.save(cleaned['out'])
        return as_json(result.to_dict())
