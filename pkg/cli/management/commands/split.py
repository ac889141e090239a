from cli.base import PipelineCommand, as_json
from cli.forms import SplitForm
from dataset.index import DatasetIndex
from dataset.surgery import with_split
from paralleleye.conf import pe_settings


class Command(PipelineCommand):
    help = "Partition a dataset into two named splits with a seeded shuffle."
    form_class = SplitForm

    def add_options(self, parser):
        parser.add_argument('dataset', nargs='?')
        parser.add_argument('--out', '-o')
        parser.add_argument('--ratio', help="train:test, e.g. 3:1")
        parser.add_argument('--seed', type=int)
        parser.add_argument('--names', help="the two split names, default train,test")

    def run(self, cleaned):
        index = DatasetIndex.load(cleaned['dataset'])
        seed = pe_settings.SEED if cleaned.get('seed') is None else cleaned['seed']
        result = with_split(index, cleaned.get('ratio') or (3, 1), seed, cleaned.get('names') or ('train', 'test'))
        result.save(cleaned['out'])
        return as_json(result.to_dict())
